#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "mxd/diagnostics.hpp"

using namespace mxd;

namespace {

double ref_effective_rank(const std::vector<double>& sv) {
    double total = 0.0;
    for (double s : sv) total += s;
    double h = 0.0;
    for (double s : sv) {
        if (s > 0.0) h -= (s / total) * std::log(s / total);
    }
    return std::exp(h);
}

MeasurementCampaign noise_free(const Scenario& sc, int p, std::uint64_t seed) {
    return simulate_campaign(sc, step2_series(sc.n_s(), p, seed), sc.partition.tx, sc.partition.rx);
}

} // namespace

TEST(EffectiveRank, Examples) {
    const std::vector<double> flat{2.0, 2.0, 2.0, 2.0, 2.0};
    EXPECT_NEAR(effective_rank(flat), 5.0, 1e-12);
    const std::vector<double> single{3.0, 0.0, 0.0};
    EXPECT_EQ(effective_rank(single), 1.0);
    const std::vector<double> two{3.0, 1.0};
    EXPECT_NEAR(effective_rank(two), 1.7547653506033232, 1e-14);
    EXPECT_NEAR(effective_rank(two), ref_effective_rank(two), 1e-14);
    const std::vector<double> zeros{0.0, 0.0};
    EXPECT_THROW(effective_rank(zeros), InvalidArgument);
    EXPECT_THROW(effective_rank(std::vector<double>{}), InvalidArgument);
}

TEST(EffectiveRank, ScaleInvariant) {
    const std::vector<double> sv{5.0, 2.0, 0.7, 0.01};
    std::vector<double> scaled;
    for (double s : sv) scaled.push_back(s * 1234.5);
    EXPECT_NEAR(effective_rank(sv), effective_rank(scaled), 1e-12);
    EXPECT_NEAR(effective_rank(sv), ref_effective_rank(sv), 1e-12);
}

TEST(JacobianRank, SisoFloorAndBounds) {
    const auto sc = make_synthetic_scenario(4, 2, 1, 3);
    const auto c = noise_free(sc, 30, 3);
    const CVector theta = upper_triangle(sc.s_dut_true.entries());
    const auto r1 = jacobian_rank_at(theta, c.prefix(1), "x");
    EXPECT_NEAR(r1.effective_rank, 1.0, 1e-9);
    EXPECT_EQ(r1.singular_values.size(), 1u);
    EXPECT_EQ(r1.d, 10);
    EXPECT_EQ(r1.tx_rx_label, "x");
    for (int p = 1; p <= 30; ++p) {
        const auto r = jacobian_rank_at(theta, c.prefix(p));
        EXPECT_GE(r.effective_rank, 1.0 - 1e-12);
        EXPECT_LE(r.effective_rank, std::min(p, 10) + 1e-12);
        EXPECT_TRUE(std::is_sorted(r.singular_values.rbegin(), r.singular_values.rend()));
    }
}

TEST(JacobianRank, DuplicateRealizationAddsNothing) {
    const auto sc = make_synthetic_scenario(4, 2, 1, 4);
    const auto c = noise_free(sc, 1, 4);
    auto twice = c;
    twice.configs.push_back(c.configs[0]);
    twice.h_meas.push_back(c.h_meas[0]);
    twice.pf_known.push_back(c.pf_known[0]);
    const CVector theta = upper_triangle(sc.s_dut_true.entries());
    EXPECT_NEAR(jacobian_rank_at(theta, twice).effective_rank, jacobian_rank_at(theta, c).effective_rank, 1e-9);
}

TEST(Mse, Examples) {
    const auto s = random_passive_reciprocal(3, 5, 0.9);
    EXPECT_EQ(mse(s, s).raw, 0.0);
    const auto zero = mse(ScatteringMatrix(CMatrix::Zero(3, 3)), s);
    EXPECT_NEAR(zero.raw, s.entries().cwiseAbs2().mean(), 1e-15);
    EXPECT_NEAR(zero.normalized, 1.0, 1e-14);
    CMatrix a(1, 1), b(1, 1);
    a(0, 0) = complex(0.3, 0.1);
    b(0, 0) = complex(0.3, 0.1) + complex(0.02, -0.01);
    EXPECT_NEAR(mse(ScatteringMatrix(b), ScatteringMatrix(a)).raw, 0.0005, 1e-15);
    EXPECT_THROW(mse(ScatteringMatrix(a), s), DimensionError);
}

TEST(TxRxChoices, CountsAndCap) {
    const auto part = PortPartition::standard(8, 4, 4);
    const auto siso = tx_rx_choices(part, 1, 1, 16, 0);
    EXPECT_EQ(siso.size(), 16u);
    std::set<std::string> labels;
    for (const auto& [t, r] : siso) labels.insert(tx_rx_label(t, r));
    EXPECT_EQ(labels.size(), 16u);
    EXPECT_EQ(tx_rx_label({0, 1}, {4, 5}), "T0.1/R4.5");

    EXPECT_EQ(tx_rx_choices(part, 2, 2, 100, 0).size(), 36u);
    const auto capped = tx_rx_choices(part, 2, 2, 16, 0);
    EXPECT_EQ(capped.size(), 16u);
    EXPECT_TRUE(std::is_sorted(capped.begin(), capped.end()));
    EXPECT_EQ(capped, tx_rx_choices(part, 2, 2, 16, 0));
    EXPECT_EQ(tx_rx_choices(part, 4, 4, 16, 0).size(), 1u);
    EXPECT_THROW(tx_rx_choices(part, 5, 1, 16, 0), InvalidArgument);
}

TEST(Sweep, RowsNestedPrefixesAndAggregates) {
    const auto sc = make_synthetic_scenario(4, 8, 4, 2);
    SweepSettings st;
    st.p_values = {1, 3, 8};
    st.splits = {{1, 1}, {2, 2}};
    st.seeds = {0, 1};
    st.run_estimate = false;
    const auto res = sweep(sc, st);
    ASSERT_EQ(res.rows.size(), (16u + 16u) * 2u * 3u);
    for (std::size_t i = 1; i < res.rows.size(); ++i) {
        const auto& a = res.rows[i - 1];
        const auto& b = res.rows[i];
        EXPECT_LE(std::tie(a.m, a.p, a.tx_rx, a.seed), std::tie(b.m, b.p, b.tx_rx, b.seed));
    }
    std::map<std::tuple<int, std::string, std::uint64_t>, std::map<int, double>> by_cell;
    for (const auto& r : res.rows) {
        EXPECT_TRUE(r.error.empty()) << r.error;
        EXPECT_EQ(r.m, r.n_t * r.n_r);
        EXPECT_EQ(r.n_a, r.n_t + r.n_r);
        EXPECT_GE(r.effective_rank, 1.0 - 1e-12);
        EXPECT_LE(r.effective_rank, std::min(r.m * r.p, 10) + 1e-12);
        EXPECT_TRUE(std::isnan(r.mse));
        by_cell[{r.m, r.tx_rx, r.seed}][r.p] = r.effective_rank;
    }
    for (const auto& [key, ranks] : by_cell) {
        EXPECT_LE(ranks.at(1), ranks.at(3) + 1e-9);
        EXPECT_LE(ranks.at(3), ranks.at(8) + 1e-9);
    }
    const auto agg = res.aggregate();
    ASSERT_EQ(agg.size(), 2u * 3u * 3u);
    for (std::size_t i = 0; i < agg.size(); i += 3) {
        EXPECT_EQ(agg[i].stat, "mean");
        EXPECT_EQ(agg[i + 1].stat, "min");
        EXPECT_EQ(agg[i + 2].stat, "max");
        EXPECT_LE(agg[i + 1].effective_rank, agg[i].effective_rank);
        EXPECT_LE(agg[i].effective_rank, agg[i + 2].effective_rank);
    }
}

TEST(Sweep, JobsDoNotChangeResults) {
    const auto sc = make_synthetic_scenario(3, 4, 2, 6);
    SweepSettings st;
    st.p_values = {1, 2};
    st.splits = {{1, 1}, {2, 1}};
    st.seeds = {3, 4};
    st.estimator.max_iters = 100;
    st.estimator.n_restarts = 2;
    st.jobs = 1;
    const auto a = sweep(sc, st);
    st.jobs = 4;
    const auto b = sweep(sc, st);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].tx_rx, b.rows[i].tx_rx);
        EXPECT_EQ(a.rows[i].effective_rank, b.rows[i].effective_rank);
        EXPECT_EQ(a.rows[i].mse, b.rows[i].mse);
    }
}

TEST(Sweep, FailuresAreRecordedPerRow) {
    const auto sc = make_synthetic_scenario(1, 2, 1, 7);
    SweepSettings st;
    st.p_values = {1, 2}; // N_S = 1 has a single Step-2 configuration
    st.run_estimate = false;
    const auto res = sweep(sc, st);
    ASSERT_EQ(res.rows.size(), 2u);
    for (const auto& r : res.rows) {
        EXPECT_FALSE(r.error.empty());
        EXPECT_TRUE(std::isnan(r.effective_rank));
    }
    st.splits = {{2, 1}};
    EXPECT_THROW(sweep(sc, st), InvalidArgument);
}

// Mean effective rank over TX/RX choices grows with p for each sub-full
// aperture, averaged over scenarios.
TEST(Trend, MeanRankIncreasesWithRealizations) {
    const std::vector<int> ps{1, 5, 10, 20, 30};
    std::map<int, std::map<int, double>> mean; // m -> p -> mean R
    std::map<int, std::map<int, int>> count;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto sc = make_synthetic_scenario(4, 8, 4, 100 + s);
        SweepSettings st;
        st.p_values = ps;
        st.splits = {{1, 1}, {2, 2}, {3, 3}};
        st.seeds = {s};
        st.run_estimate = false;
        for (const auto& r : sweep(sc, st).rows) {
            ASSERT_TRUE(r.error.empty()) << r.error;
            mean[r.m][r.p] += r.effective_rank;
            ++count[r.m][r.p];
        }
    }
    for (int m : {1, 4, 9}) {
        ASSERT_GE(count[m][1], 16 * 10);
        for (std::size_t i = 1; i < ps.size(); ++i) {
            const double lo = mean[m][ps[i - 1]] / count[m][ps[i - 1]];
            const double hi = mean[m][ps[i]] / count[m][ps[i]];
            EXPECT_GT(hi, lo) << "m=" << m << " p=" << ps[i];
        }
    }
}

TEST(Trend, FullApertureBeatsSisoAtSingleRealization) {
    const auto sc = make_synthetic_scenario(4, 8, 4, 1);
    const auto full = noise_free(sc, 1, 1);
    const auto siso = extract_submatrix_campaign(full, {0}, {4});
    const double e_full = mse(estimate(full).s_dut_hat, sc.s_dut_true).raw;
    const double e_siso = mse(estimate(siso).s_dut_hat, sc.s_dut_true).raw;
    EXPECT_LT(1e3 * e_full, e_siso);
}
