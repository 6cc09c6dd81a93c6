#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mxd/diagnostics.hpp"
#include "mxd/estimator.hpp"
#include "mxd/random.hpp"
#include "oracle.hpp"

using namespace mxd;

namespace {

double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

struct Setup {
    Scenario scenario;
    MeasurementCampaign campaign;
    CVector theta_true;
};

// n_t x n_r split of n_t + n_r accessible ports, noise-free.
Setup make_setup(int n_s, int n_t, int n_r, int p, std::uint64_t seed) {
    Setup s;
    s.scenario = make_synthetic_scenario(n_s, n_t + n_r, n_t, seed);
    s.campaign = simulate_campaign(s.scenario, step2_series(n_s, p, seed), s.scenario.partition.tx,
                                   s.scenario.partition.rx);
    s.theta_true = upper_triangle(s.scenario.s_dut_true.entries());
    return s;
}

CVector random_theta(int d, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    CVector t(d);
    for (int k = 0; k < d; ++k) t(k) = complex_gaussian(rng, scale * scale);
    return t;
}

} // namespace

TEST(Parameterization, IndexMapAndBasis) {
    const auto map = DutParameterization::index_map(3);
    const std::vector<std::pair<int, int>> expected{{0, 0}, {0, 1}, {1, 1}, {0, 2}, {1, 2}, {2, 2}};
    EXPECT_EQ(map, expected);
    EXPECT_EQ(DutParameterization::dimension(4), 10);
    EXPECT_EQ(DutParameterization::ports_for_dimension(10), 4);
    EXPECT_THROW(DutParameterization::ports_for_dimension(4), InvalidArgument);

    const CMatrix e = DutParameterization::basis(3, 3);
    CMatrix ref = CMatrix::Zero(3, 3);
    ref(0, 2) = ref(2, 0) = 1.0;
    EXPECT_EQ(e, ref);
    const CMatrix diag = DutParameterization::basis(2, 3);
    EXPECT_EQ(diag(1, 1), complex(1.0));
    EXPECT_EQ(diag.cwiseAbs().sum(), 1.0);
}

TEST(Parameterization, SymRoundTrip) {
    CVector theta(3);
    theta << complex(0.1, 0.2), complex(0.3, -0.1), complex(-0.5, 0.0);
    const CMatrix s = sym(theta).entries();
    EXPECT_EQ(s(0, 0), theta(0));
    EXPECT_EQ(s(0, 1), theta(1));
    EXPECT_EQ(s(1, 0), theta(1));
    EXPECT_EQ(s(1, 1), theta(2));
    EXPECT_EQ(upper_triangle(s), theta);
    EXPECT_THROW(sym(CVector::Zero(4)), InvalidArgument);
    const CVector t10 = random_theta(10, 1, 0.3);
    EXPECT_EQ(upper_triangle(sym(t10).entries()), t10);
}

TEST(Loss, ZeroAtTruthAndOneAtDirectPath) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto s = make_setup(4, 2, 2, 10, seed);
        EXPECT_LT(loss(s.theta_true, s.campaign), 1e-12);
        EXPECT_EQ(loss(CVector::Zero(10), s.campaign), 1.0);
    }
}

TEST(Loss, MatchesEntrywiseOracle) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = make_setup(3, 2, 3, 7, seed + 20);
        const CVector theta = random_theta(6, seed, 0.3);
        const double ref = oracle::literal_loss(theta, s.campaign);
        EXPECT_NEAR(loss(theta, s.campaign), ref, 1e-12 * ref);
    }
}

TEST(Loss, InvariantUnderRealizationOrder) {
    const auto s = make_setup(4, 1, 2, 12, 3);
    auto shuffled = s.campaign;
    std::vector<std::size_t> idx(12);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(5);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        shuffled.configs[i] = s.campaign.configs[idx[i]];
        shuffled.h_meas[i] = s.campaign.h_meas[idx[i]];
        shuffled.pf_known[i] = s.campaign.pf_known[idx[i]];
    }
    const CVector theta = random_theta(10, 9, 0.2);
    EXPECT_NEAR(loss(theta, shuffled), loss(theta, s.campaign), 1e-14);
}

TEST(Loss, DegenerateCampaign) {
    auto s = make_setup(2, 1, 1, 3, 4);
    for (int r = 0; r < 3; ++r) {
        const auto& pf = s.campaign.pf_known[static_cast<std::size_t>(r)];
        s.campaign.h_meas[static_cast<std::size_t>(r)] = select(pf.s_aa, s.campaign.rx, s.campaign.tx);
    }
    EXPECT_THROW(loss(s.theta_true, s.campaign), DegenerateCampaignError);
    EXPECT_THROW(estimate(s.campaign), DegenerateCampaignError);
}

TEST(Jacobian, IdentityFixtureGivesBasis) {
    // A = B = I, D = 0: H = S_RT + S, so each column is vec(E_k).
    const int n = 3;
    MeasurementCampaign c;
    c.n_s = n;
    c.n_a = 2 * n;
    c.tx = iota_set(n);
    c.rx = iota_set(n, n);
    PFRealization pf;
    pf.s_aa = CMatrix::Zero(2 * n, 2 * n);
    pf.s_as = CMatrix::Zero(2 * n, n);
    pf.s_sa = CMatrix::Zero(n, 2 * n);
    pf.s_as.bottomRows(n).setIdentity();
    pf.s_sa.leftCols(n).setIdentity();
    pf.s_ss = CMatrix::Zero(n, n);
    c.configs = {TLNConfiguration::all(n, Termination::Thru)};
    c.pf_known = {pf};
    c.h_meas = {CMatrix::Identity(n, n) * 0.5};
    const CMatrix j = analytic_jacobian(random_theta(6, 2, 0.3), c);
    ASSERT_EQ(j.rows(), 9);
    ASSERT_EQ(j.cols(), 6);
    for (int k = 0; k < 6; ++k) {
        const CMatrix e = DutParameterization::basis(k, n);
        EXPECT_LT(max_abs(j.col(k) - Eigen::Map<const CVector>(e.data(), 9)), 1e-15) << k;
    }
}

TEST(Jacobian, MatchesLiteralInverseForm) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = make_setup(4, 2, 3, 5, seed + 40);
        const CVector theta = random_theta(10, seed, 0.25);
        const CMatrix ja = analytic_jacobian(theta, s.campaign);
        const CMatrix jl = oracle::literal_jacobian(theta, s.campaign);
        EXPECT_LT(max_abs(ja - jl) / max_abs(jl), 1e-12) << seed;
    }
}

TEST(Jacobian, MatchesFiniteDifferencesAndIsHolomorphic) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto s = make_setup(3, 2, 2, 5, seed + 60);
        const CVector theta = random_theta(6, seed + 1, 0.25);
        const CMatrix ja = analytic_jacobian(theta, s.campaign);
        const CMatrix fr = fd_jacobian(theta, s.campaign, 1e-6, FdDirection::Real);
        const CMatrix fi = fd_jacobian(theta, s.campaign, 1e-6, FdDirection::Imag);
        EXPECT_LT(max_abs(ja - fr) / max_abs(ja), 1e-6);
        EXPECT_LT(max_abs(fi - complex(0.0, 1.0) * fr) / max_abs(fr), 1e-6);
    }
}

TEST(Jacobian, FiniteDifferenceStepShowsTruncationAndRoundoff) {
    const auto s = make_setup(4, 2, 2, 5, 70);
    const CVector theta = random_theta(10, 3, 0.25);
    const CMatrix ja = analytic_jacobian(theta, s.campaign);
    auto err = [&](double h) { return max_abs(fd_jacobian(theta, s.campaign, h) - ja) / max_abs(ja); };
    const double coarse = err(1e-2);
    const double mid = err(1e-5);
    const double fine = err(1e-13);
    EXPECT_GT(coarse, 10.0 * mid);
    EXPECT_GT(fine, 10.0 * mid);
    EXPECT_THROW(fd_jacobian(theta, s.campaign, 0.0), InvalidArgument);
}

TEST(Jacobian, ShapeForSiso) {
    const auto s = make_setup(4, 1, 1, 1, 71);
    const CMatrix j = analytic_jacobian(s.theta_true, s.campaign);
    EXPECT_EQ(j.rows(), 1);
    EXPECT_EQ(j.cols(), 10);
    EXPECT_THROW(analytic_jacobian(CVector::Zero(6), s.campaign), DimensionError);
}

TEST(Gradient, MatchesFiniteDifferencesOfLoss) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto s = make_setup(3, 2, 2, 6, seed + 80);
        const ObservationModel model(s.campaign);
        const CVector theta = random_theta(6, seed + 7, 0.3);
        const auto [l, g] = model.loss_and_gradient(theta);
        EXPECT_DOUBLE_EQ(l, model.loss(theta));
        const double h = 1e-7;
        for (int k = 0; k < 6; ++k) {
            CVector tp = theta, tm = theta;
            tp(k) += h;
            tm(k) -= h;
            const double d_re = (model.loss(tp) - model.loss(tm)) / (2 * h);
            tp = theta;
            tm = theta;
            tp(k) += complex(0.0, h);
            tm(k) -= complex(0.0, h);
            const double d_im = (model.loss(tp) - model.loss(tm)) / (2 * h);
            EXPECT_NEAR(g(k).real(), d_re, 1e-5 * std::max(1.0, std::abs(d_re)));
            EXPECT_NEAR(g(k).imag(), d_im, 1e-5 * std::max(1.0, std::abs(d_im)));
        }
    }
}

TEST(Estimate, RecoversDutFromFullMimoSingleRealization) {
    const auto s = make_setup(4, 4, 4, 1, 1);
    const auto rep = estimate(s.campaign);
    EXPECT_TRUE(rep.converged);
    EXPECT_LT(max_abs(rep.s_dut_hat.entries() - s.scenario.s_dut_true.entries()), 1e-6);
    EXPECT_LT(mse(rep.s_dut_hat, s.scenario.s_dut_true).normalized, 1e-8);
}

TEST(Estimate, SisoSingleRealizationIsNotIdentifiable) {
    const auto s = make_setup(4, 1, 1, 1, 1);
    const auto rep = estimate(s.campaign);
    EXPECT_GT(mse(rep.s_dut_hat, s.scenario.s_dut_true).normalized, 1e-1);
}

TEST(Estimate, ReportBookkeepingAndDeterminism) {
    const auto s = make_setup(3, 2, 2, 3, 5);
    EstimatorSettings st;
    st.max_iters = 300;
    st.n_restarts = 3;
    st.seed = 17;
    const auto a = estimate(s.campaign, st);
    const auto b = estimate(s.campaign, st);
    EXPECT_EQ(a.theta_hat, b.theta_hat);
    EXPECT_EQ(a.loss_trace, b.loss_trace);
    ASSERT_EQ(a.restart_losses.size(), 3u);
    const auto best = std::min_element(a.restart_losses.begin(), a.restart_losses.end());
    EXPECT_EQ(a.best_restart, best - a.restart_losses.begin());
    EXPECT_EQ(a.final_loss, *best);
    EXPECT_FALSE(a.loss_trace.empty());
    EXPECT_LE(static_cast<int>(a.loss_trace.size()), st.max_iters + 1);
    EXPECT_EQ(a.final_loss, *std::min_element(a.loss_trace.begin(), a.loss_trace.end()));
    EXPECT_DOUBLE_EQ(loss(a.theta_hat, s.campaign), a.final_loss);

    st.seed = 18;
    EXPECT_NE(estimate(s.campaign, st).theta_hat, a.theta_hat);
}

TEST(Estimate, SettingsValidation) {
    const auto s = make_setup(2, 1, 1, 2, 6);
    EstimatorSettings st;
    st.initial_step = 0.0;
    EXPECT_THROW(estimate(s.campaign, st), InvalidArgument);
    st = {};
    st.n_restarts = 0;
    EXPECT_THROW(estimate(s.campaign, st), InvalidArgument);
    st = {};
    st.decay = 1.5;
    EXPECT_THROW(estimate(s.campaign, st), InvalidArgument);
    st = {};
    st.adam_beta2 = 1.0;
    EXPECT_THROW(estimate(s.campaign, st), InvalidArgument);
}
