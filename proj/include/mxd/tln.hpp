#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mxd/network.hpp"

namespace mxd {

/// Switch state of one NDA antenna port. Declaration order is the canonical
/// ordering used for sorting and duplicate detection.
enum class Termination : std::uint8_t { LoadA, LoadB, LoadC, CoupledLeft, CoupledRight, Thru };

enum class Stage : std::uint8_t { Step1, Step2 };

char to_token(Termination t);
Termination termination_from_token(char c);

/// One row of the configuration matrix: a termination per NDA port.
///
/// A coupled load joins port i (CoupledLeft) to port i+1 (CoupledRight).
/// Step-1 configurations contain no Thru; Step-2 configurations contain at
/// least one.
class TLNConfiguration {
public:
    TLNConfiguration() = default;
    /// Stage is inferred from the presence of Thru. Throws InvalidArgument on an
    /// invalid coupled-pair pattern.
    explicit TLNConfiguration(std::vector<Termination> terminations);

    /// Parses the compact token form, e.g. "AT()B".
    static TLNConfiguration from_token(std::string_view token);
    static TLNConfiguration all(int n_s, Termination t);

    const std::vector<Termination>& terminations() const noexcept { return terms_; }
    Stage stage() const noexcept { return stage_; }
    int n_s() const noexcept { return static_cast<int>(terms_.size()); }
    Termination operator[](int port) const { return terms_[static_cast<std::size_t>(port)]; }

    bool has_thru() const noexcept;
    std::string token() const;

    auto operator<=>(const TLNConfiguration& other) const { return terms_ <=> other.terms_; }
    bool operator==(const TLNConfiguration& other) const { return terms_ == other.terms_; }

private:
    std::vector<Termination> terms_;
    Stage stage_ = Stage::Step1;
};

/// Parametric stand-in for the measured switch network: reflection of each
/// individual load as seen at the OTA-side port, the Thru and coupled-load
/// two-ports, and the reflection of an idle DUT-side port.
struct TLNHardwareModel {
    complex gamma_a = std::polar(0.9, 0.3);
    complex gamma_b = -std::polar(0.85, 0.1);
    complex gamma_c = std::polar(0.05, 1.0);
    complex thru_s21 = std::polar(0.95, -0.7);
    complex thru_s11 = 0.05;
    complex thru_s22 = 0.05;
    complex coupled_s21 = std::polar(0.9, -0.4);
    complex coupled_s11 = 0.1;
    complex idle_dut_reflection = std::polar(0.9, 0.2);

    /// Loads pairwise distinct, all magnitudes <= 1.
    void validate() const;
};

/// 2N_S-port TLN scattering matrix with port sets "Cbar" (0..N_S-1, OTA side)
/// and "S" (N_S..2N_S-1, DUT side).
ScatteringMatrix synthesize_tln(const TLNConfiguration& config, const TLNHardwareModel& hw);

/// Number of Thru-free configurations: sum_r C(n-r, r) 3^(n-2r).
std::uint64_t count_step1_configs(int n_s);
/// Number of configurations with at least one Thru: sum_r C(n-r, r) (4^(n-2r) - 3^(n-2r)).
std::uint64_t count_step2_configs(int n_s);

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// Every configuration of the given stage, sorted canonically.
std::vector<TLNConfiguration> enumerate_configs(int n_s, Stage stage,
                                                std::uint64_t cap = kDefaultEnumerationCap);

/// Thru-free series in which every port sees each individual load and every
/// admissible coupled pair at least once. No configuration repeats.
std::vector<TLNConfiguration> step1_series(int n_s, std::uint64_t seed);

/// All-Thru first, then p-1 distinct Step-2 configurations drawn uniformly
/// without replacement.
std::vector<TLNConfiguration> step2_series(int n_s, int p, std::uint64_t seed,
                                           std::uint64_t cap = kDefaultEnumerationCap);

} // namespace mxd
