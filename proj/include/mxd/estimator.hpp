#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mxd/campaign.hpp"

namespace mxd {

/// Reciprocal DUT parametrised by its upper triangle, enumerated column-wise:
/// j = 0..N_S-1, i = 0..j.
struct DutParameterization {
    static int dimension(int n_s) { return n_s * (n_s + 1) / 2; }
    /// Inverse of dimension(); throws InvalidArgument if d is not triangular.
    static int ports_for_dimension(Eigen::Index d);
    static std::vector<std::pair<int, int>> index_map(int n_s);
    /// Basis matrix E_k: e_i e_i^T on the diagonal, e_i e_j^T + e_j e_i^T off it.
    static CMatrix basis(int k, int n_s);
};

/// Symmetric matrix with (i_k, j_k) and (j_k, i_k) both equal to theta_k.
ScatteringMatrix sym(const CVector& theta);
/// Upper triangle of `s` in the same enumeration; inverse of sym().
CVector upper_triangle(const CMatrix& s);

/// Campaign pre-sliced for repeated evaluation: per realization the blocks
/// A = S_RS, B = S_ST, D = S_SS and S_RT plus the measured H.
class ObservationModel {
public:
    explicit ObservationModel(const MeasurementCampaign& campaign, const Tolerances& tol = {});

    int p() const noexcept { return static_cast<int>(blocks_.size()); }
    int m() const noexcept { return m_; }
    int n_s() const noexcept { return n_s_; }
    int d() const noexcept { return DutParameterization::dimension(n_s_); }

    /// Denominator of the relative l1 misfit: sum_r ||H_r^meas - S_RT^(r)||_1.
    double normalization() const noexcept { return normalization_; }

    /// Relative l1 misfit; throws DegenerateCampaignError on a zero denominator.
    double loss(const CVector& theta) const;

    /// Loss and the gradient packed as complex numbers dL/dRe + j dL/dIm.
    /// The l1 subgradient is taken as 0 where a residual is exactly zero.
    std::pair<double, CVector> loss_and_gradient(const CVector& theta) const;

    /// Stacked Jacobian d vec(H_r) / d theta, (m p) x d.
    CMatrix jacobian(const CVector& theta) const;

private:
    struct Block {
        CMatrix a, b, d, s_rt, h_meas;
        std::string id;
    };
    struct ResolventProducts {
        CMatrix w;  // (I - D S)^-1 B
        CMatrix x;  // (I - D S)^-1 D
        CMatrix as; // A S
    };
    static ResolventProducts resolvent_products(const Block& b, const CMatrix& s, const CMatrix& eye,
                                                const Tolerances& tol);
    void check_theta(const CVector& theta) const;

    std::vector<Block> blocks_;
    int m_ = 0;
    int n_s_ = 0;
    double normalization_ = 0.0;
    Tolerances tol_;
};

double loss(const CVector& theta, const MeasurementCampaign& campaign);

/// Rows: realization-major, then vec(H_r) column-major (RX index fastest).
CMatrix analytic_jacobian(const CVector& theta, const MeasurementCampaign& campaign);

enum class FdDirection { Real, Imag };

/// Central differences of forward_model with respect to Re(theta_k) or
/// Im(theta_k). Since theta -> H is holomorphic, the Imag result equals
/// j times the Real result.
CMatrix fd_jacobian(const CVector& theta, const MeasurementCampaign& campaign, double step,
                    FdDirection direction = FdDirection::Real);

struct EstimatorSettings {
    double initial_step = 0.05;
    double decay = 0.999; // per iteration
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int max_iters = 20000;
    double loss_tolerance = 1e-10;
    int n_restarts = 8;
    double init_scale = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EstimateReport {
    CVector theta_hat;
    ScatteringMatrix s_dut_hat;
    double final_loss = 0.0;
    std::vector<double> loss_trace; // of the selected restart
    std::vector<double> restart_losses;
    int best_restart = 0;
    bool converged = false;
    std::vector<std::string> warnings;
};

/// Multi-start Adam minimisation of the relative l1 misfit.
EstimateReport estimate(const MeasurementCampaign& campaign, const EstimatorSettings& settings = {});

} // namespace mxd
