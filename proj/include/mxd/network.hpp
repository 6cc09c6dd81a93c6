#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "mxd/types.hpp"

namespace mxd {

/// Square complex scattering matrix with optional named port-index sets
/// (e.g. "A" and "C" on the OTA fixture, "Cbar" and "S" on the TLN).
class ScatteringMatrix {
public:
    ScatteringMatrix() = default;
    explicit ScatteringMatrix(CMatrix entries);
    ScatteringMatrix(CMatrix entries, std::map<std::string, IndexSet> port_sets);

    const CMatrix& entries() const noexcept { return entries_; }
    int n_ports() const noexcept { return static_cast<int>(entries_.rows()); }

    const std::map<std::string, IndexSet>& port_sets() const noexcept { return port_sets_; }
    /// Throws InvalidArgument if the set is not defined.
    const IndexSet& port_set(const std::string& name) const;
    ScatteringMatrix with_port_set(const std::string& name, IndexSet indices) const;

    bool is_reciprocal(double tol = Tolerances{}.reciprocity) const;
    bool is_passive(double tol = Tolerances{}.passivity) const;
    double spectral_norm() const;

    complex operator()(int row, int col) const { return entries_(row, col); }

private:
    CMatrix entries_;
    std::map<std::string, IndexSet> port_sets_;
};

/// Port bookkeeping for the OTA fixture / TLN / DUT cascade.
///
/// OTA fixture ports: accessible (A) followed by nda_side (C).
/// TLN ports: tln_ota_side (Cbar) followed by dut_side (S).
/// The programmable fixture inherits A from the OTA fixture and S from the TLN,
/// numbered 0..N_A-1 and N_A..N_A+N_S-1 respectively.
struct PortPartition {
    IndexSet accessible;   // A, in OTA numbering
    IndexSet tx;           // T, subset of A
    IndexSet rx;           // R, subset of A
    IndexSet nda_side;     // C, in OTA numbering
    IndexSet tln_ota_side; // Cbar, in TLN numbering
    IndexSet dut_side;     // S, in TLN numbering

    int n_a() const noexcept { return static_cast<int>(accessible.size()); }
    int n_s() const noexcept { return static_cast<int>(nda_side.size()); }
    int n_t() const noexcept { return static_cast<int>(tx.size()); }
    int n_r() const noexcept { return static_cast<int>(rx.size()); }

    /// Contiguous layout with the first n_tx accessible ports transmitting and
    /// the remaining ones receiving.
    static PortPartition standard(int n_a, int n_s, int n_tx);
    static PortPartition standard(int n_a, int n_s, IndexSet tx, IndexSet rx);

    /// Throws InvalidArgument when T/R do not partition A or set sizes disagree.
    void validate() const;
};

/// The four blocks of the programmable-fixture scattering matrix for one TLN
/// configuration. Row/column order of s_aa follows PortPartition::accessible.
struct PFRealization {
    CMatrix s_aa; // N_A x N_A
    CMatrix s_as; // N_A x N_S
    CMatrix s_sa; // N_S x N_A
    CMatrix s_ss; // N_S x N_S
    std::string config_id;

    int n_a() const noexcept { return static_cast<int>(s_aa.rows()); }
    int n_s() const noexcept { return static_cast<int>(s_ss.rows()); }

    /// Full (N_A+N_S)-port matrix [[s_aa, s_as], [s_sa, s_ss]].
    CMatrix assembled() const;
    void validate() const;
};

/// Rows and columns of `m` picked by index lists.
CMatrix select(const CMatrix& m, const IndexSet& rows, const IndexSet& cols);

/// 0..n-1
IndexSet iota_set(int n, int first = 0);

/// Redheffer star composition of the OTA fixture with one TLN state.
PFRealization compose_pf(const ScatteringMatrix& s_ota, const ScatteringMatrix& s_tln,
                         const PortPartition& partition, const std::string& config_id = "",
                         const Tolerances& tol = {});

/// Transmission block H = S_RT + S_RS S^DUT (I - S_SS S^DUT)^-1 S_ST.
/// `tx` and `rx` index the accessible ports of `pf`.
CMatrix forward_model(const PFRealization& pf, const ScatteringMatrix& s_dut, const IndexSet& tx,
                      const IndexSet& rx, const Tolerances& tol = {});
CMatrix forward_model(const PFRealization& pf, const CMatrix& s_dut, const IndexSet& tx,
                      const IndexSet& rx, const Tolerances& tol = {});

/// Full N_A x N_A scattering matrix seen at the accessible ports.
ScatteringMatrix measurable_s(const PFRealization& pf, const ScatteringMatrix& s_dut,
                              const Tolerances& tol = {});

/// Symmetrised complex Ginibre matrix rescaled to spectral norm norm_cap * u,
/// u ~ U[0.5, 1]. Deterministic in `seed`.
ScatteringMatrix random_passive_reciprocal(int n, std::uint64_t seed, double norm_cap);

namespace detail {

/// Solves m X = rhs by partial-pivot LU. Returns nullopt when the estimated
/// condition number (1/rcond) exceeds the cap; the estimate is written to
/// `condition` either way.
std::optional<CMatrix> checked_solve(const CMatrix& m, const CMatrix& rhs, double condition_cap,
                                     double* condition = nullptr);

} // namespace detail

} // namespace mxd
