#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "mxd/network.hpp"
#include "mxd/tln.hpp"

namespace mxd {

inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

/// Ground-truth world for a simulation: OTA fixture, TLN hardware, DUT, and
/// the two imperfection channels. An infinite dB value disables a channel.
struct Scenario {
    ScatteringMatrix s_ota;
    TLNHardwareModel hw;
    ScatteringMatrix s_dut_true;
    PortPartition partition;
    double snr_db = kNoiseless;
    double ota_knowledge_error_db = kNoiseless;
    std::uint64_t seed = 0;

    int n_a() const noexcept { return partition.n_a(); }
    int n_s() const noexcept { return partition.n_s(); }

    void validate(const Tolerances& tol = {}) const;
};

/// Random passive reciprocal OTA fixture and DUT with the default hardware
/// model; the first n_tx accessible ports transmit.
Scenario make_synthetic_scenario(int n_s, int n_a, int n_tx, std::uint64_t seed,
                                 double ota_norm_cap = 0.95, double dut_norm_cap = 0.9);

/// Scenario whose accessible ports are reduced to `keep` (original indices);
/// the others are treated as matched. TX/RX are intersected with `keep` and
/// renumbered.
Scenario restrict_scenario(const Scenario& scenario, const IndexSet& keep);

/// p measurements of H through p known programmable-fixture realizations.
struct MeasurementCampaign {
    int n_s = 0;
    int n_a = 0;
    IndexSet tx; // indices into the accessible ports of pf_known
    IndexSet rx;
    std::vector<TLNConfiguration> configs;
    std::vector<CMatrix> h_meas;          // N_R x N_T each
    std::vector<PFRealization> pf_known;  // estimator's knowledge of the fixture
    double snr_db = kNoiseless;
    /// Per-entry complex noise variance, when known (0 for noise-free data).
    std::optional<double> noise_variance;

    int p() const noexcept { return static_cast<int>(configs.size()); }
    int m() const noexcept { return static_cast<int>(tx.size() * rx.size()); }

    /// Vertically stacked vec(H_r), column-major within each realization;
    /// length m * p.
    CVector measurement_vector() const;

    /// First k realizations.
    MeasurementCampaign prefix(int k) const;

    void validate() const;
};

/// Simulates one measurement per configuration. Noise streams derive from
/// scenario.seed, so equal inputs give bit-identical campaigns.
MeasurementCampaign simulate_campaign(const Scenario& scenario,
                                      const std::vector<TLNConfiguration>& configs,
                                      const IndexSet& tx, const IndexSet& rx,
                                      const Tolerances& tol = {});

/// Row/column restriction to a subset of transmitters and receivers. The
/// accessible ports of pf_known shrink to tx_sub u rx_sub (sorted) and are
/// renumbered; the remaining ports are equivalent to matched terminations.
MeasurementCampaign extract_submatrix_campaign(const MeasurementCampaign& full,
                                               const IndexSet& tx_sub, const IndexSet& rx_sub);

} // namespace mxd
