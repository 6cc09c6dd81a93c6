#include "mxd/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mxd/random.hpp"

namespace mxd {

namespace {

enum Stream : std::uint64_t { kOtaStream = 0, kDutStream = 1, kNoiseStream = 2, kOtaErrorStream = 3 };

double db_to_ratio(double db) { return std::pow(10.0, db / 10.0); }

/// Position of each element of `subset` inside `within`; throws if absent.
IndexSet positions_in(const IndexSet& subset, const IndexSet& within, const char* what) {
    IndexSet out;
    out.reserve(subset.size());
    for (int v : subset) {
        auto it = std::find(within.begin(), within.end(), v);
        if (it == within.end()) {
            throw InvalidArgument(std::string(what) + " port " + std::to_string(v) +
                                  " is not part of the parent set");
        }
        out.push_back(static_cast<int>(it - within.begin()));
    }
    return out;
}

void check_tx_rx(const IndexSet& tx, const IndexSet& rx, int n_a) {
    std::set<int> t(tx.begin(), tx.end());
    std::set<int> r(rx.begin(), rx.end());
    if (t.size() != tx.size() || r.size() != rx.size()) {
        throw InvalidArgument("TX/RX sets contain duplicate ports");
    }
    for (int v : tx) {
        if (v < 0 || v >= n_a) throw InvalidArgument("TX port " + std::to_string(v) + " out of range");
        if (r.count(v)) throw InvalidArgument("port " + std::to_string(v) + " is both TX and RX");
    }
    for (int v : rx) {
        if (v < 0 || v >= n_a) throw InvalidArgument("RX port " + std::to_string(v) + " out of range");
    }
}

CMatrix perturbed_ota(const Scenario& scenario) {
    const CMatrix& ota = scenario.s_ota.entries();
    if (!std::isfinite(scenario.ota_knowledge_error_db)) return ota;
    const double mean_power = ota.cwiseAbs2().mean();
    const double variance = mean_power / db_to_ratio(scenario.ota_knowledge_error_db);
    std::mt19937_64 rng(derive_seed(scenario.seed, kOtaErrorStream));
    CMatrix out = ota;
    for (Eigen::Index j = 0; j < ota.cols(); ++j) {
        for (Eigen::Index i = 0; i < ota.rows(); ++i) out(i, j) += complex_gaussian(rng, variance);
    }
    return out;
}

} // namespace

void Scenario::validate(const Tolerances& tol) const {
    partition.validate();
    hw.validate();
    if (s_ota.n_ports() != n_a() + n_s()) {
        throw DimensionError("scenario S^OTA must have N_A + N_S ports");
    }
    if (s_dut_true.n_ports() != n_s()) throw DimensionError("scenario S^DUT must have N_S ports");
    if (!s_dut_true.is_reciprocal(tol.reciprocity)) throw InvalidArgument("S^DUT must be symmetric");
    if (!s_dut_true.is_passive(tol.passivity)) throw InvalidArgument("S^DUT must be passive");
    if (!(snr_db > 0.0)) throw InvalidArgument("snr_db must be positive");
    if (!(ota_knowledge_error_db > 0.0)) throw InvalidArgument("ota_knowledge_error_db must be positive");
}

Scenario make_synthetic_scenario(int n_s, int n_a, int n_tx, std::uint64_t seed, double ota_norm_cap,
                                 double dut_norm_cap) {
    Scenario s;
    s.partition = PortPartition::standard(n_a, n_s, n_tx);
    s.s_ota = random_passive_reciprocal(n_a + n_s, derive_seed(seed, kOtaStream), ota_norm_cap)
                  .with_port_set("A", s.partition.accessible)
                  .with_port_set("C", s.partition.nda_side);
    s.s_dut_true = random_passive_reciprocal(n_s, derive_seed(seed, kDutStream), dut_norm_cap);
    s.seed = seed;
    return s;
}

Scenario restrict_scenario(const Scenario& scenario, const IndexSet& keep) {
    std::vector<int> sorted(keep.begin(), keep.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    const auto& part = scenario.partition;
    positions_in(sorted, part.accessible, "kept");

    IndexSet tx_kept;
    IndexSet rx_kept;
    for (int v : part.tx) if (std::binary_search(sorted.begin(), sorted.end(), v)) tx_kept.push_back(v);
    for (int v : part.rx) if (std::binary_search(sorted.begin(), sorted.end(), v)) rx_kept.push_back(v);

    IndexSet ota_ports(sorted.begin(), sorted.end());
    ota_ports.insert(ota_ports.end(), part.nda_side.begin(), part.nda_side.end());

    Scenario out = scenario;
    out.partition = PortPartition::standard(static_cast<int>(sorted.size()), part.n_s(),
                                            positions_in(tx_kept, sorted, "TX"),
                                            positions_in(rx_kept, sorted, "RX"));
    out.s_ota = ScatteringMatrix(select(scenario.s_ota.entries(), ota_ports, ota_ports),
                                 {{"A", out.partition.accessible}, {"C", out.partition.nda_side}});
    return out;
}

// MeasurementCampaign ------------------------------------------------------

CVector MeasurementCampaign::measurement_vector() const {
    const Eigen::Index m_ = m();
    CVector y(m_ * p());
    for (std::size_t r = 0; r < h_meas.size(); ++r) {
        y.segment(static_cast<Eigen::Index>(r) * m_, m_) =
            Eigen::Map<const CVector>(h_meas[r].data(), m_);
    }
    return y;
}

MeasurementCampaign MeasurementCampaign::prefix(int k) const {
    if (k < 0 || k > p()) throw InvalidArgument("prefix length outside 0..p");
    MeasurementCampaign out = *this;
    out.configs.resize(static_cast<std::size_t>(k));
    out.h_meas.resize(static_cast<std::size_t>(k));
    out.pf_known.resize(static_cast<std::size_t>(k));
    return out;
}

void MeasurementCampaign::validate() const {
    if (n_s < 1 || n_a < 1) throw InvalidArgument("campaign needs positive n_s and n_a");
    check_tx_rx(tx, rx, n_a);
    if (h_meas.size() != configs.size() || pf_known.size() != configs.size()) {
        throw DimensionError("campaign configs, h_meas and pf_known must be index-aligned");
    }
    for (std::size_t r = 0; r < configs.size(); ++r) {
        if (configs[r].n_s() != n_s) throw DimensionError("configuration port count differs from n_s");
        if (h_meas[r].rows() != static_cast<Eigen::Index>(rx.size()) ||
            h_meas[r].cols() != static_cast<Eigen::Index>(tx.size())) {
            throw DimensionError("h_meas[" + std::to_string(r) + "] is not N_R x N_T");
        }
        pf_known[r].validate();
        if (pf_known[r].n_a() != n_a || pf_known[r].n_s() != n_s) {
            throw DimensionError("pf_known[" + std::to_string(r) + "] has the wrong port counts");
        }
    }
}

MeasurementCampaign simulate_campaign(const Scenario& scenario,
                                      const std::vector<TLNConfiguration>& configs,
                                      const IndexSet& tx, const IndexSet& rx, const Tolerances& tol) {
    scenario.validate(tol);
    check_tx_rx(tx, rx, scenario.n_a());

    MeasurementCampaign c;
    c.n_s = scenario.n_s();
    c.n_a = scenario.n_a();
    c.tx = tx;
    c.rx = rx;
    c.configs = configs;
    c.snr_db = scenario.snr_db;

    const bool perturbed = std::isfinite(scenario.ota_knowledge_error_db);
    const ScatteringMatrix known_ota(perturbed_ota(scenario));

    for (std::size_t r = 0; r < configs.size(); ++r) {
        if (configs[r].n_s() != c.n_s) {
            throw DimensionError("configuration " + std::to_string(r) + " has " +
                                 std::to_string(configs[r].n_s()) + " ports, scenario has N_S = " +
                                 std::to_string(c.n_s));
        }
        const std::string id = "r" + std::to_string(r) + ":" + configs[r].token();
        const auto tln = synthesize_tln(configs[r], scenario.hw);
        const auto pf_true = compose_pf(scenario.s_ota, tln, scenario.partition, id, tol);
        c.h_meas.push_back(forward_model(pf_true, scenario.s_dut_true, tx, rx, tol));
        c.pf_known.push_back(perturbed ? compose_pf(known_ota, tln, scenario.partition, id, tol)
                                       : pf_true);
    }

    c.noise_variance = 0.0;
    if (std::isfinite(scenario.snr_db) && !c.h_meas.empty() && c.m() > 0) {
        double power = 0.0;
        Eigen::Index count = 0;
        for (const auto& h : c.h_meas) {
            power += h.cwiseAbs2().sum();
            count += h.size();
        }
        const double variance = (power / static_cast<double>(count)) / db_to_ratio(scenario.snr_db);
        std::mt19937_64 rng(derive_seed(scenario.seed, kNoiseStream));
        for (auto& h : c.h_meas) {
            for (Eigen::Index j = 0; j < h.cols(); ++j) {
                for (Eigen::Index i = 0; i < h.rows(); ++i) h(i, j) += complex_gaussian(rng, variance);
            }
        }
        c.noise_variance = variance;
    }
    return c;
}

MeasurementCampaign extract_submatrix_campaign(const MeasurementCampaign& full, const IndexSet& tx_sub,
                                               const IndexSet& rx_sub) {
    full.validate();
    const IndexSet cols = positions_in(tx_sub, full.tx, "TX");
    const IndexSet rows = positions_in(rx_sub, full.rx, "RX");

    IndexSet keep(tx_sub.begin(), tx_sub.end());
    keep.insert(keep.end(), rx_sub.begin(), rx_sub.end());
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    const IndexSet all_s = iota_set(full.n_s);

    MeasurementCampaign out;
    out.n_s = full.n_s;
    out.n_a = static_cast<int>(keep.size());
    out.tx = positions_in(tx_sub, keep, "TX");
    out.rx = positions_in(rx_sub, keep, "RX");
    out.configs = full.configs;
    out.snr_db = full.snr_db;
    out.noise_variance = full.noise_variance;
    for (std::size_t r = 0; r < full.configs.size(); ++r) {
        out.h_meas.push_back(select(full.h_meas[r], rows, cols));
        const auto& pf = full.pf_known[r];
        PFRealization sub;
        sub.s_aa = select(pf.s_aa, keep, keep);
        sub.s_as = select(pf.s_as, keep, all_s);
        sub.s_sa = select(pf.s_sa, all_s, keep);
        sub.s_ss = pf.s_ss;
        sub.config_id = pf.config_id;
        out.pf_known.push_back(std::move(sub));
    }
    return out;
}

} // namespace mxd
