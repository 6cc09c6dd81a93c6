#include "mxd/network.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace mxd {

ScatteringMatrix::ScatteringMatrix(CMatrix entries) : ScatteringMatrix(std::move(entries), {}) {}

ScatteringMatrix::ScatteringMatrix(CMatrix entries, std::map<std::string, IndexSet> port_sets)
    : entries_(std::move(entries)), port_sets_(std::move(port_sets)) {
    if (entries_.rows() != entries_.cols()) {
        throw DimensionError("scattering matrix must be square, got " +
                             std::to_string(entries_.rows()) + "x" +
                             std::to_string(entries_.cols()));
    }
    for (const auto& [name, set] : port_sets_) {
        for (int idx : set) {
            if (idx < 0 || idx >= n_ports()) {
                throw InvalidArgument("port set '" + name + "' index " + std::to_string(idx) +
                                      " outside 0.." + std::to_string(n_ports() - 1));
            }
        }
    }
}

const IndexSet& ScatteringMatrix::port_set(const std::string& name) const {
    auto it = port_sets_.find(name);
    if (it == port_sets_.end()) throw InvalidArgument("undefined port set '" + name + "'");
    return it->second;
}

ScatteringMatrix ScatteringMatrix::with_port_set(const std::string& name, IndexSet indices) const {
    auto sets = port_sets_;
    sets[name] = std::move(indices);
    return ScatteringMatrix(entries_, std::move(sets));
}

bool ScatteringMatrix::is_reciprocal(double tol) const {
    return (entries_ - entries_.transpose()).cwiseAbs().maxCoeff() <= tol;
}

bool ScatteringMatrix::is_passive(double tol) const { return spectral_norm() <= 1.0 + tol; }

double ScatteringMatrix::spectral_norm() const {
    if (entries_.size() == 0) return 0.0;
    Eigen::JacobiSVD<CMatrix> svd(entries_);
    return svd.singularValues()(0);
}

// PortPartition ------------------------------------------------------------

IndexSet iota_set(int n, int first) {
    IndexSet out(static_cast<std::size_t>(std::max(n, 0)));
    std::iota(out.begin(), out.end(), first);
    return out;
}

PortPartition PortPartition::standard(int n_a, int n_s, int n_tx) {
    if (n_tx < 0 || n_tx > n_a) throw InvalidArgument("n_tx must lie in 0..n_a");
    return standard(n_a, n_s, iota_set(n_tx), iota_set(n_a - n_tx, n_tx));
}

PortPartition PortPartition::standard(int n_a, int n_s, IndexSet tx, IndexSet rx) {
    if (n_a < 1 || n_s < 1) throw InvalidArgument("n_a and n_s must be positive");
    PortPartition p;
    p.accessible = iota_set(n_a);
    p.tx = std::move(tx);
    p.rx = std::move(rx);
    p.nda_side = iota_set(n_s, n_a);
    p.tln_ota_side = iota_set(n_s);
    p.dut_side = iota_set(n_s, n_s);
    p.validate();
    return p;
}

void PortPartition::validate() const {
    std::set<int> a(accessible.begin(), accessible.end());
    std::set<int> t(tx.begin(), tx.end());
    std::set<int> r(rx.begin(), rx.end());
    if (a.size() != accessible.size() || t.size() != tx.size() || r.size() != rx.size()) {
        throw InvalidArgument("port index sets must not contain duplicates");
    }
    std::set<int> both;
    std::set_intersection(t.begin(), t.end(), r.begin(), r.end(), std::inserter(both, both.end()));
    if (!both.empty()) throw InvalidArgument("TX and RX port sets overlap");
    std::set<int> uni;
    std::set_union(t.begin(), t.end(), r.begin(), r.end(), std::inserter(uni, uni.end()));
    if (uni != a) throw InvalidArgument("TX and RX ports must together form the accessible set");
    if (tln_ota_side.size() != nda_side.size() || dut_side.size() != nda_side.size()) {
        throw InvalidArgument("|C|, |Cbar| and |S| must all equal N_S");
    }
    if (nda_side.empty()) throw InvalidArgument("N_S must be positive");
    for (int c : nda_side) {
        if (a.count(c)) throw InvalidArgument("accessible and NDA port sets overlap");
    }
}

// PFRealization ------------------------------------------------------------

CMatrix PFRealization::assembled() const {
    const Eigen::Index na = s_aa.rows();
    const Eigen::Index ns = s_ss.rows();
    CMatrix out(na + ns, na + ns);
    out.topLeftCorner(na, na) = s_aa;
    out.topRightCorner(na, ns) = s_as;
    out.bottomLeftCorner(ns, na) = s_sa;
    out.bottomRightCorner(ns, ns) = s_ss;
    return out;
}

void PFRealization::validate() const {
    const auto na = s_aa.rows();
    const auto ns = s_ss.rows();
    if (s_aa.cols() != na || s_ss.cols() != ns || s_as.rows() != na || s_as.cols() != ns ||
        s_sa.rows() != ns || s_sa.cols() != na) {
        throw DimensionError("inconsistent PF block dimensions for configuration '" + config_id +
                             "'");
    }
}

// Algebra ------------------------------------------------------------------

CMatrix select(const CMatrix& m, const IndexSet& rows, const IndexSet& cols) {
    CMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
        }
    }
    return out;
}

namespace detail {

std::optional<CMatrix> checked_solve(const CMatrix& m, const CMatrix& rhs, double condition_cap,
                                     double* condition) {
    Eigen::PartialPivLU<CMatrix> lu(m);
    const double rcond = lu.rcond();
    const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (condition) *condition = cond;
    if (!(cond <= condition_cap)) return std::nullopt;
    return CMatrix(lu.solve(rhs));
}

} // namespace detail

PFRealization compose_pf(const ScatteringMatrix& s_ota, const ScatteringMatrix& s_tln,
                         const PortPartition& partition, const std::string& config_id,
                         const Tolerances& tol) {
    const int na = partition.n_a();
    const int ns = partition.n_s();
    if (s_ota.n_ports() != na + ns) {
        throw DimensionError("S^OTA has " + std::to_string(s_ota.n_ports()) +
                             " ports, expected N_A + N_S = " + std::to_string(na + ns));
    }
    if (s_tln.n_ports() != 2 * ns) {
        throw DimensionError("S^TLN has " + std::to_string(s_tln.n_ports()) +
                             " ports, expected 2 N_S = " + std::to_string(2 * ns));
    }

    const auto& A = partition.accessible;
    const auto& C = partition.nda_side;
    const auto& Cb = partition.tln_ota_side;
    const auto& S = partition.dut_side;
    const CMatrix& ota = s_ota.entries();
    const CMatrix& tln = s_tln.entries();

    const CMatrix o_aa = select(ota, A, A);
    const CMatrix o_ac = select(ota, A, C);
    const CMatrix o_ca = select(ota, C, A);
    const CMatrix o_cc = select(ota, C, C);
    const CMatrix t_cc = select(tln, Cb, Cb);
    const CMatrix t_cs = select(tln, Cb, S);
    const CMatrix t_sc = select(tln, S, Cb);
    const CMatrix t_ss = select(tln, S, S);
    const CMatrix eye = CMatrix::Identity(ns, ns);

    // X1 = (S_CC T_CC - I)^-1, X2 = (T_CC S_CC - I)^-1; only products are formed.
    double cond = 0.0;
    auto x1_oca = detail::checked_solve(o_cc * t_cc - eye, o_ca, tol.condition_cap, &cond);
    if (!x1_oca) throw CompositionSingularError(config_id, cond);
    auto x2_tcs = detail::checked_solve(t_cc * o_cc - eye, t_cs, tol.condition_cap, &cond);
    if (!x2_tcs) throw CompositionSingularError(config_id, cond);

    PFRealization pf;
    pf.s_aa = o_aa - o_ac * t_cc * (*x1_oca);
    pf.s_as = -o_ac * (*x2_tcs);
    pf.s_sa = -t_sc * (*x1_oca);
    pf.s_ss = t_ss - t_sc * o_cc * (*x2_tcs);
    pf.config_id = config_id;
    return pf;
}

namespace {

CMatrix cascade(const CMatrix& s_rt, const CMatrix& s_rs, const CMatrix& s_st, const CMatrix& d,
                const CMatrix& s_dut, const std::string& config_id, const Tolerances& tol) {
    const auto ns = d.rows();
    if (s_dut.rows() != ns || s_dut.cols() != ns) {
        throw DimensionError("S^DUT is " + std::to_string(s_dut.rows()) + "x" +
                             std::to_string(s_dut.cols()) + ", expected " + std::to_string(ns) +
                             "x" + std::to_string(ns));
    }
    double cond = 0.0;
    auto w = detail::checked_solve(CMatrix::Identity(ns, ns) - d * s_dut, s_st, tol.condition_cap,
                                   &cond);
    if (!w) {
        throw ResonantCascadeError("resonant cascade (I - S_SS S^DUT singular, condition " +
                                   std::to_string(cond) + ") for configuration '" + config_id +
                                   "'");
    }
    return s_rt + s_rs * s_dut * (*w);
}

void check_ports(const IndexSet& ports, int n_a, const char* what) {
    for (int p : ports) {
        if (p < 0 || p >= n_a) {
            throw DimensionError(std::string(what) + " port " + std::to_string(p) +
                                 " outside the accessible range 0.." + std::to_string(n_a - 1));
        }
    }
}

} // namespace

CMatrix forward_model(const PFRealization& pf, const CMatrix& s_dut, const IndexSet& tx,
                      const IndexSet& rx, const Tolerances& tol) {
    pf.validate();
    check_ports(tx, pf.n_a(), "TX");
    check_ports(rx, pf.n_a(), "RX");
    const IndexSet all_s = iota_set(pf.n_s());
    return cascade(select(pf.s_aa, rx, tx), select(pf.s_as, rx, all_s), select(pf.s_sa, all_s, tx),
                   pf.s_ss, s_dut, pf.config_id, tol);
}

CMatrix forward_model(const PFRealization& pf, const ScatteringMatrix& s_dut, const IndexSet& tx,
                      const IndexSet& rx, const Tolerances& tol) {
    return forward_model(pf, s_dut.entries(), tx, rx, tol);
}

ScatteringMatrix measurable_s(const PFRealization& pf, const ScatteringMatrix& s_dut,
                              const Tolerances& tol) {
    pf.validate();
    return ScatteringMatrix(
        cascade(pf.s_aa, pf.s_as, pf.s_sa, pf.s_ss, s_dut.entries(), pf.config_id, tol));
}

ScatteringMatrix random_passive_reciprocal(int n, std::uint64_t seed, double norm_cap) {
    if (n < 1) throw InvalidArgument("random_passive_reciprocal: n must be >= 1");
    if (!(norm_cap > 0.0 && norm_cap < 1.0)) {
        throw InvalidArgument("random_passive_reciprocal: norm_cap must lie in (0, 1)");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    std::uniform_real_distribution<double> unit(0.5, 1.0);

    CMatrix g(n, n);
    double norm = 0.0;
    CMatrix sym;
    do {
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) g(i, j) = complex(normal(rng), normal(rng));
        }
        sym = 0.5 * (g + g.transpose());
        norm = Eigen::JacobiSVD<CMatrix>(sym).singularValues()(0);
    } while (norm == 0.0);

    const double target = norm_cap * unit(rng);
    return ScatteringMatrix(sym * (target / norm));
}

} // namespace mxd
