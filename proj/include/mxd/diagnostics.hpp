#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mxd/estimator.hpp"

namespace mxd {

struct RankReport {
    std::vector<double> singular_values; // descending, length min(m p, d)
    double effective_rank = 0.0;
    int m = 0;
    int p = 0;
    int d = 0;
    std::string tx_rx_label;
};

/// exp of the Shannon entropy of the normalised singular values; 0 ln 0 := 0.
/// Throws InvalidArgument when no value is strictly positive.
double effective_rank(std::span<const double> singular_values);

/// Linearises the campaign around theta0 and reports the spectrum of the
/// stacked Jacobian.
RankReport jacobian_rank_at(const CVector& theta0, const MeasurementCampaign& campaign,
                            std::string tx_rx_label = "");

struct MseResult {
    double raw = 0.0;        // mean |s_hat - s|^2
    double normalized = 0.0; // raw / mean |s|^2
};

MseResult mse(const ScatteringMatrix& s_hat, const ScatteringMatrix& s_true);

/// Which linearisation point the sweep uses for rank analysis.
enum class RankPoint { Truth, Random };

struct SweepSettings {
    std::vector<int> p_values{1};
    std::vector<std::pair<int, int>> splits{{1, 1}}; // (n_t, n_r)
    std::vector<std::uint64_t> seeds{0};
    int max_choices = 16;
    bool run_estimate = true;
    EstimatorSettings estimator;
    RankPoint rank_point = RankPoint::Truth;
    int jobs = 1;
};

struct SweepRow {
    int n_a = 0;
    int n_t = 0;
    int n_r = 0;
    int m = 0;
    int p = 0;
    std::string tx_rx;
    double effective_rank = 0.0;
    double mse = 0.0;
    double mse_normalized = 0.0;
    std::uint64_t seed = 0;
    std::string error; // empty on success
};

struct AggregateRow {
    int m = 0;
    int p = 0;
    std::string stat; // mean | min | max
    double effective_rank = 0.0;
    double mse = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows; // sorted by (m, p, tx_rx, seed)

    std::vector<AggregateRow> aggregate() const;
};

/// TX/RX subsets of the scenario's TX and RX pools for one split, in
/// lexicographic order; more than max_choices are thinned to a seeded random
/// selection of max_choices.
std::vector<std::pair<IndexSet, IndexSet>> tx_rx_choices(const PortPartition& partition, int n_t, int n_r,
                                                         int max_choices, std::uint64_t seed);

std::string tx_rx_label(const IndexSet& tx, const IndexSet& rx);

/// Rank and MSE over splits x TX/RX choices x seeds x p. For each seed one
/// Step-2 series of length max(p_values) is simulated with all TX/RX ports;
/// smaller p use its prefixes. Per-cell failures are recorded in the row.
SweepResult sweep(const Scenario& scenario, const SweepSettings& settings);

} // namespace mxd
