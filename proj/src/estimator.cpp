#include "mxd/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mxd/random.hpp"

namespace mxd {

// Parameterization -----------------------------------------------------------

int DutParameterization::ports_for_dimension(Eigen::Index d) {
    const auto n = static_cast<int>(std::lround((std::sqrt(8.0 * static_cast<double>(d) + 1.0) - 1.0) / 2.0));
    if (d < 1 || dimension(n) != d) {
        throw InvalidArgument("parameter vector length " + std::to_string(d) +
                              " is not a triangular number N_S(N_S+1)/2");
    }
    return n;
}

std::vector<std::pair<int, int>> DutParameterization::index_map(int n_s) {
    std::vector<std::pair<int, int>> out;
    out.reserve(static_cast<std::size_t>(dimension(n_s)));
    for (int j = 0; j < n_s; ++j) {
        for (int i = 0; i <= j; ++i) out.emplace_back(i, j);
    }
    return out;
}

CMatrix DutParameterization::basis(int k, int n_s) {
    const auto map = index_map(n_s);
    if (k < 0 || k >= static_cast<int>(map.size())) throw InvalidArgument("basis index out of range");
    const auto [i, j] = map[static_cast<std::size_t>(k)];
    CMatrix e = CMatrix::Zero(n_s, n_s);
    e(i, j) = 1.0;
    e(j, i) = 1.0;
    return e;
}

ScatteringMatrix sym(const CVector& theta) {
    const int n = DutParameterization::ports_for_dimension(theta.size());
    CMatrix s(n, n);
    Eigen::Index k = 0;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i <= j; ++i, ++k) {
            s(i, j) = theta(k);
            s(j, i) = theta(k);
        }
    }
    return ScatteringMatrix(std::move(s));
}

CVector upper_triangle(const CMatrix& s) {
    if (s.rows() != s.cols()) throw DimensionError("upper_triangle: matrix must be square");
    const int n = static_cast<int>(s.rows());
    CVector theta(DutParameterization::dimension(n));
    Eigen::Index k = 0;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i <= j; ++i) theta(k++) = s(i, j);
    }
    return theta;
}

// ObservationModel -----------------------------------------------------------

ObservationModel::ObservationModel(const MeasurementCampaign& campaign, const Tolerances& tol)
    : m_(campaign.m()), n_s_(campaign.n_s), tol_(tol) {
    campaign.validate();
    const IndexSet all_s = iota_set(campaign.n_s);
    blocks_.reserve(static_cast<std::size_t>(campaign.p()));
    for (int r = 0; r < campaign.p(); ++r) {
        const auto& pf = campaign.pf_known[static_cast<std::size_t>(r)];
        Block b;
        b.a = select(pf.s_as, campaign.rx, all_s);
        b.b = select(pf.s_sa, all_s, campaign.tx);
        b.d = pf.s_ss;
        b.s_rt = select(pf.s_aa, campaign.rx, campaign.tx);
        b.h_meas = campaign.h_meas[static_cast<std::size_t>(r)];
        b.id = pf.config_id;
        normalization_ += (b.h_meas - b.s_rt).cwiseAbs().sum();
        blocks_.push_back(std::move(b));
    }
}

void ObservationModel::check_theta(const CVector& theta) const {
    if (theta.size() != d()) {
        throw DimensionError("theta has length " + std::to_string(theta.size()) + ", expected d = " +
                             std::to_string(d()));
    }
}

namespace {

Eigen::PartialPivLU<CMatrix> checked_lu(const CMatrix& m, const Tolerances& tol, const std::string& id) {
    Eigen::PartialPivLU<CMatrix> lu(m);
    const double rcond = lu.rcond();
    if (!(rcond > 0.0 && 1.0 / rcond <= tol.condition_cap)) {
        throw ResonantCascadeError("resonant cascade at current DUT estimate for configuration '" + id + "'");
    }
    return lu;
}

} // namespace

ObservationModel::ResolventProducts ObservationModel::resolvent_products(const Block& b, const CMatrix& s,
                                                                         const CMatrix& eye, const Tolerances& tol) {
    const auto n = s.rows();
    const auto n_t = b.b.cols();
    CMatrix rhs(n, n_t + n);
    rhs << b.b, b.d;
    const CMatrix sol = checked_lu(eye - b.d * s, tol, b.id).solve(rhs);
    return {sol.leftCols(n_t), sol.rightCols(n), b.a * s};
}

double ObservationModel::loss(const CVector& theta) const {
    check_theta(theta);
    if (!(normalization_ > 0.0)) {
        throw DegenerateCampaignError("campaign carries no DUT signature (zero loss denominator)");
    }
    const CMatrix s = sym(theta).entries();
    const CMatrix eye = CMatrix::Identity(n_s_, n_s_);
    double num = 0.0;
    for (const auto& b : blocks_) {
        const CMatrix w = checked_lu(eye - b.d * s, tol_, b.id).solve(b.b);
        num += (b.s_rt + b.a * s * w - b.h_meas).cwiseAbs().sum();
    }
    return num / normalization_;
}

std::pair<double, CVector> ObservationModel::loss_and_gradient(const CVector& theta) const {
    check_theta(theta);
    if (!(normalization_ > 0.0)) {
        throw DegenerateCampaignError("campaign carries no DUT signature (zero loss denominator)");
    }
    const CMatrix s = sym(theta).entries();
    const CMatrix eye = CMatrix::Identity(n_s_, n_s_);
    CMatrix m_acc = CMatrix::Zero(n_s_, n_s_);
    double num = 0.0;
    for (const auto& b : blocks_) {
        // dH = L dS W with W = (I - D S)^-1 B and L = A (I - S D)^-1 = A + A S X,
        // X = (I - D S)^-1 D, so one factorisation serves both.
        const ResolventProducts rp = resolvent_products(b, s, eye, tol_);
        CMatrix resid = b.s_rt + rp.as * rp.w - b.h_meas;
        for (Eigen::Index k = 0; k < resid.size(); ++k) {
            const double mag = std::abs(resid(k));
            num += mag;
            resid(k) = mag > 0.0 ? resid(k) / mag : complex(0.0);
        }
        const CMatrix l = b.a + rp.as * rp.x;
        m_acc.noalias() += rp.w * resid.adjoint() * l;
    }
    // g_k = tr(U^H L E_k W) = tr(E_k M), M = sum_r W U^H L; the gradient of the
    // real loss with respect to (Re, Im) packs into conj(g_k).
    CVector grad(d());
    Eigen::Index k = 0;
    for (int j = 0; j < n_s_; ++j) {
        for (int i = 0; i <= j; ++i, ++k) {
            const complex g = i == j ? m_acc(i, i) : m_acc(i, j) + m_acc(j, i);
            grad(k) = std::conj(g) / normalization_;
        }
    }
    return {num / normalization_, grad};
}

CMatrix ObservationModel::jacobian(const CVector& theta) const {
    check_theta(theta);
    const CMatrix s = sym(theta).entries();
    const CMatrix eye = CMatrix::Identity(n_s_, n_s_);
    const auto map = DutParameterization::index_map(n_s_);
    CMatrix jac(static_cast<Eigen::Index>(m_) * p(), d());
    Eigen::Index row0 = 0;
    for (const auto& b : blocks_) {
        const ResolventProducts rp = resolvent_products(b, s, eye, tol_);
        const CMatrix& w = rp.w;
        const CMatrix l = b.a + rp.as * rp.x;
        for (std::size_t k = 0; k < map.size(); ++k) {
            const auto [i, j] = map[k];
            CMatrix dh = l.col(i) * w.row(j);
            if (i != j) dh += l.col(j) * w.row(i);
            jac.col(static_cast<Eigen::Index>(k)).segment(row0, m_) = Eigen::Map<const CVector>(dh.data(), m_);
        }
        row0 += m_;
    }
    return jac;
}

double loss(const CVector& theta, const MeasurementCampaign& campaign) {
    return ObservationModel(campaign).loss(theta);
}

CMatrix analytic_jacobian(const CVector& theta, const MeasurementCampaign& campaign) {
    return ObservationModel(campaign).jacobian(theta);
}

CMatrix fd_jacobian(const CVector& theta, const MeasurementCampaign& campaign, double step,
                    FdDirection direction) {
    if (!(step > 0.0)) throw InvalidArgument("finite-difference step must be positive");
    campaign.validate();
    const int d = static_cast<int>(theta.size());
    const int n_s = DutParameterization::ports_for_dimension(d);
    if (n_s != campaign.n_s) throw DimensionError("theta does not match the campaign's N_S");
    const Eigen::Index m = campaign.m();
    const complex delta = direction == FdDirection::Real ? complex(step, 0.0) : complex(0.0, step);

    auto stacked = [&](const CVector& th) {
        const auto s = sym(th);
        CVector y(m * campaign.p());
        for (int r = 0; r < campaign.p(); ++r) {
            const CMatrix h = forward_model(campaign.pf_known[static_cast<std::size_t>(r)], s, campaign.tx, campaign.rx);
            y.segment(r * m, m) = Eigen::Map<const CVector>(h.data(), m);
        }
        return y;
    };

    CMatrix jac(m * campaign.p(), d);
    for (int k = 0; k < d; ++k) {
        CVector plus = theta;
        CVector minus = theta;
        plus(k) += delta;
        minus(k) -= delta;
        jac.col(k) = (stacked(plus) - stacked(minus)) / (2.0 * step);
    }
    return jac;
}

// Estimation -------------------------------------------------------------------

void EstimatorSettings::validate() const {
    if (!(decay > 0.0 && decay <= 1.0)) throw InvalidArgument("decay must lie in (0, 1]");
    if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
    if (n_restarts < 1) throw InvalidArgument("n_restarts must be >= 1");
    if (!(initial_step > 0.0)) throw InvalidArgument("initial_step must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw InvalidArgument("Adam betas must lie in [0, 1)");
    }
    if (!(adam_epsilon > 0.0)) throw InvalidArgument("adam_epsilon must be positive");
    if (!(init_scale >= 0.0)) throw InvalidArgument("init_scale must be non-negative");
}

namespace {

constexpr int kMinStallWindow = 50;

/// Iterations over which the best loss must improve by loss_tolerance. Adam on
/// an l1 misfit oscillates at the scale of the step size, so the window spans
/// at least one decay time constant 1/(1 - decay).
int stall_window(const EstimatorSettings& st) {
    if (st.decay >= 1.0) return kMinStallWindow;
    const double tau = std::ceil(1.0 / (1.0 - st.decay));
    return static_cast<int>(std::clamp(tau, double(kMinStallWindow), double(std::max(st.max_iters, kMinStallWindow))));
}

struct DescentResult {
    CVector best_theta;
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<double> trace;
    bool diverged = false;
};

DescentResult adam_descent(const ObservationModel& model, CVector theta, const EstimatorSettings& st) {
    const Eigen::Index d = theta.size();
    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(2 * d);
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(2 * d);
    DescentResult res;
    res.best_theta = theta;
    res.trace.reserve(static_cast<std::size_t>(st.max_iters));
    std::vector<double> best_history;
    best_history.reserve(static_cast<std::size_t>(st.max_iters));

    const int window = stall_window(st);
    double step = st.initial_step;
    double b1_pow = 1.0;
    double b2_pow = 1.0;
    for (int t = 1; t <= st.max_iters; ++t) {
        double value = 0.0;
        CVector grad;
        try {
            std::tie(value, grad) = model.loss_and_gradient(theta);
        } catch (const ResonantCascadeError&) {
            res.diverged = true;
            break;
        }
        if (!std::isfinite(value)) {
            res.diverged = true;
            break;
        }
        res.trace.push_back(value);
        if (value < res.best_loss) {
            res.best_loss = value;
            res.best_theta = theta;
        }
        best_history.push_back(res.best_loss);
        if (res.best_loss == 0.0) break;
        if (t > window && best_history[static_cast<std::size_t>(t - 1 - window)] - res.best_loss < st.loss_tolerance) {
            break;
        }

        b1_pow *= st.adam_beta1;
        b2_pow *= st.adam_beta2;
        for (Eigen::Index k = 0; k < d; ++k) {
            const double g[2] = {grad(k).real(), grad(k).imag()};
            double upd[2];
            for (int c = 0; c < 2; ++c) {
                const Eigen::Index idx = 2 * k + c;
                m1(idx) = st.adam_beta1 * m1(idx) + (1.0 - st.adam_beta1) * g[c];
                m2(idx) = st.adam_beta2 * m2(idx) + (1.0 - st.adam_beta2) * g[c] * g[c];
                const double mhat = m1(idx) / (1.0 - b1_pow);
                const double vhat = m2(idx) / (1.0 - b2_pow);
                upd[c] = step * mhat / (std::sqrt(vhat) + st.adam_epsilon);
            }
            theta(k) -= complex(upd[0], upd[1]);
        }
        step *= st.decay;
    }
    return res;
}

} // namespace

EstimateReport estimate(const MeasurementCampaign& campaign, const EstimatorSettings& settings) {
    settings.validate();
    const ObservationModel model(campaign);
    if (!(model.normalization() > 0.0)) {
        throw DegenerateCampaignError("campaign carries no DUT signature (zero loss denominator)");
    }
    const int d = model.d();

    EstimateReport report;
    report.final_loss = std::numeric_limits<double>::infinity();
    DescentResult best;
    for (int restart = 0; restart < settings.n_restarts; ++restart) {
        std::mt19937_64 rng(derive_seed(settings.seed, static_cast<std::uint64_t>(restart)));
        CVector theta0(d);
        for (int k = 0; k < d; ++k) theta0(k) = complex_gaussian(rng, settings.init_scale * settings.init_scale);

        DescentResult res = adam_descent(model, theta0, settings);
        if (res.trace.empty()) {
            // Starting point itself was resonant.
            report.restart_losses.push_back(std::numeric_limits<double>::infinity());
            report.warnings.push_back("restart " + std::to_string(restart) + " started at a resonant point");
            continue;
        }
        if (res.diverged) {
            report.warnings.push_back("restart " + std::to_string(restart) + " hit a resonant cascade");
        }
        report.restart_losses.push_back(res.best_loss);
        // Strict comparison keeps the lowest restart index on ties.
        if (res.best_loss < report.final_loss) {
            report.final_loss = res.best_loss;
            report.best_restart = restart;
            best = std::move(res);
        }
    }
    if (best.trace.empty()) throw ResonantCascadeError("every restart started at a resonant point");

    report.theta_hat = best.best_theta;
    report.s_dut_hat = sym(best.best_theta);
    report.loss_trace = std::move(best.trace);

    if (campaign.noise_variance && *campaign.noise_variance > 0.0) {
        // Expected l1 misfit at the truth: E|n| = (sqrt(pi)/2) sigma per entry.
        const double floor = static_cast<double>(model.m()) * model.p() * 0.5 * std::sqrt(std::numbers::pi) *
                             std::sqrt(*campaign.noise_variance) / model.normalization();
        report.converged = report.final_loss < 10.0 * floor;
    } else {
        report.converged = report.final_loss < settings.loss_tolerance;
    }
    if (report.s_dut_hat.spectral_norm() > 1.0) {
        report.warnings.push_back("estimated S^DUT is not passive (spectral norm " +
                                  std::to_string(report.s_dut_hat.spectral_norm()) + ")");
    }
    return report;
}

} // namespace mxd
