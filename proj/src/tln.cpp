#include "mxd/tln.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace mxd {

char to_token(Termination t) {
    switch (t) {
    case Termination::LoadA: return 'A';
    case Termination::LoadB: return 'B';
    case Termination::LoadC: return 'C';
    case Termination::CoupledLeft: return '(';
    case Termination::CoupledRight: return ')';
    case Termination::Thru: return 'T';
    }
    return '?';
}

Termination termination_from_token(char c) {
    switch (c) {
    case 'A': return Termination::LoadA;
    case 'B': return Termination::LoadB;
    case 'C': return Termination::LoadC;
    case '(': return Termination::CoupledLeft;
    case ')': return Termination::CoupledRight;
    case 'T': return Termination::Thru;
    default: throw InvalidArgument(std::string("unknown termination token '") + c + "'");
    }
}

TLNConfiguration::TLNConfiguration(std::vector<Termination> terminations)
    : terms_(std::move(terminations)) {
    if (terms_.empty()) throw InvalidArgument("TLN configuration needs at least one port");
    for (std::size_t i = 0; i < terms_.size();) {
        if (terms_[i] == Termination::CoupledLeft) {
            if (i + 1 >= terms_.size() || terms_[i + 1] != Termination::CoupledRight) {
                throw InvalidArgument("coupled load at port " + std::to_string(i) +
                                      " has no right partner in '" + token() + "'");
            }
            i += 2;
        } else if (terms_[i] == Termination::CoupledRight) {
            throw InvalidArgument("coupled load at port " + std::to_string(i) +
                                  " has no left partner in '" + token() + "'");
        } else {
            ++i;
        }
    }
    stage_ = has_thru() ? Stage::Step2 : Stage::Step1;
}

TLNConfiguration TLNConfiguration::from_token(std::string_view token) {
    std::vector<Termination> terms;
    terms.reserve(token.size());
    for (char c : token) terms.push_back(termination_from_token(c));
    return TLNConfiguration(std::move(terms));
}

TLNConfiguration TLNConfiguration::all(int n_s, Termination t) {
    if (t == Termination::CoupledLeft || t == Termination::CoupledRight) {
        throw InvalidArgument("all(): coupled loads cannot fill every port");
    }
    return TLNConfiguration(std::vector<Termination>(static_cast<std::size_t>(n_s), t));
}

bool TLNConfiguration::has_thru() const noexcept {
    return std::find(terms_.begin(), terms_.end(), Termination::Thru) != terms_.end();
}

std::string TLNConfiguration::token() const {
    std::string out;
    out.reserve(terms_.size());
    for (auto t : terms_) out.push_back(to_token(t));
    return out;
}

void TLNHardwareModel::validate() const {
    if (gamma_a == gamma_b || gamma_a == gamma_c || gamma_b == gamma_c) {
        throw InvalidArgument("TLN individual loads must be pairwise distinct");
    }
    const complex all[] = {gamma_a, gamma_b,     gamma_c,     thru_s21,           thru_s11,
                           thru_s22, coupled_s21, coupled_s11, idle_dut_reflection};
    for (auto v : all) {
        if (!(std::abs(v) <= 1.0)) throw InvalidArgument("TLN hardware coefficient exceeds unit magnitude");
    }
}

ScatteringMatrix synthesize_tln(const TLNConfiguration& config, const TLNHardwareModel& hw) {
    const int n = config.n_s();
    if (n < 1) throw InvalidArgument("synthesize_tln: empty configuration");
    CMatrix s = CMatrix::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        const int dut = n + i;
        switch (config[i]) {
        case Termination::LoadA:
        case Termination::LoadB:
        case Termination::LoadC:
            s(i, i) = config[i] == Termination::LoadA   ? hw.gamma_a
                      : config[i] == Termination::LoadB ? hw.gamma_b
                                                        : hw.gamma_c;
            s(dut, dut) = hw.idle_dut_reflection;
            break;
        case Termination::Thru:
            s(i, i) = hw.thru_s11;
            s(dut, dut) = hw.thru_s22;
            s(i, dut) = hw.thru_s21;
            s(dut, i) = hw.thru_s21;
            break;
        case Termination::CoupledLeft:
            s(i, i) = hw.coupled_s11;
            s(i + 1, i + 1) = hw.coupled_s11;
            s(i, i + 1) = hw.coupled_s21;
            s(i + 1, i) = hw.coupled_s21;
            s(dut, dut) = hw.idle_dut_reflection;
            break;
        case Termination::CoupledRight:
            s(dut, dut) = hw.idle_dut_reflection;
            break;
        }
    }
    return ScatteringMatrix(std::move(s), {{"Cbar", iota_set(n)}, {"S", iota_set(n, n)}});
}

// Counting -----------------------------------------------------------------

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    std::uint64_t out = 0;
    if (__builtin_mul_overflow(a, b, &out)) throw InvalidArgument("configuration count overflows 64 bits");
    return out;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
    std::uint64_t out = 0;
    if (__builtin_add_overflow(a, b, &out)) throw InvalidArgument("configuration count overflows 64 bits");
    return out;
}

std::uint64_t checked_pow(std::uint64_t base, int exp) {
    std::uint64_t out = 1;
    for (int i = 0; i < exp; ++i) out = checked_mul(out, base);
    return out;
}

std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t out = 1;
    for (int i = 1; i <= k; ++i) {
        // out * (n - k + i) is divisible by i at every step.
        out = checked_mul(out, static_cast<std::uint64_t>(n - k + i)) / static_cast<std::uint64_t>(i);
    }
    return out;
}

void require_positive(int n_s) {
    if (n_s < 1) throw InvalidArgument("n_s must be >= 1");
}

} // namespace

std::uint64_t count_step1_configs(int n_s) {
    require_positive(n_s);
    std::uint64_t total = 0;
    for (int r = 0; r <= n_s / 2; ++r) {
        total = checked_add(total, checked_mul(binomial(n_s - r, r), checked_pow(3, n_s - 2 * r)));
    }
    return total;
}

std::uint64_t count_step2_configs(int n_s) {
    require_positive(n_s);
    std::uint64_t total = 0;
    for (int r = 0; r <= n_s / 2; ++r) {
        const int k = n_s - 2 * r;
        total = checked_add(total, checked_mul(binomial(n_s - r, r), checked_pow(4, k) - checked_pow(3, k)));
    }
    return total;
}

// Enumeration --------------------------------------------------------------

namespace {

void enumerate_rec(std::vector<Termination>& cur, std::size_t pos, bool allow_thru,
                   std::vector<TLNConfiguration>& out) {
    const std::size_t n = cur.size();
    if (pos == n) {
        out.emplace_back(cur);
        return;
    }
    // Choices in canonical order so the output comes out sorted.
    for (auto t : {Termination::LoadA, Termination::LoadB, Termination::LoadC}) {
        cur[pos] = t;
        enumerate_rec(cur, pos + 1, allow_thru, out);
    }
    if (pos + 1 < n) {
        cur[pos] = Termination::CoupledLeft;
        cur[pos + 1] = Termination::CoupledRight;
        enumerate_rec(cur, pos + 2, allow_thru, out);
    }
    if (allow_thru) {
        cur[pos] = Termination::Thru;
        enumerate_rec(cur, pos + 1, allow_thru, out);
    }
}

} // namespace

std::vector<TLNConfiguration> enumerate_configs(int n_s, Stage stage, std::uint64_t cap) {
    const std::uint64_t count =
        stage == Stage::Step1 ? count_step1_configs(n_s) : count_step2_configs(n_s);
    if (count > cap) {
        throw InvalidArgument("enumeration of " + std::to_string(count) +
                              " configurations exceeds the cap of " + std::to_string(cap));
    }
    std::vector<TLNConfiguration> all;
    std::vector<Termination> cur(static_cast<std::size_t>(n_s), Termination::LoadA);
    enumerate_rec(cur, 0, stage == Stage::Step2, all);
    if (stage == Stage::Step1) return all;

    std::vector<TLNConfiguration> step2;
    step2.reserve(count);
    for (auto& c : all) {
        if (c.has_thru()) step2.push_back(std::move(c));
    }
    return step2;
}

// Series -------------------------------------------------------------------

namespace {

Termination random_load(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, 2);
    return static_cast<Termination>(pick(rng));
}

/// Draws a Step-2 configuration uniformly by walking the ports with weights
/// equal to the number of completions of each choice.
class Step2Sampler {
public:
    explicit Step2Sampler(int n) : n_(n), all4_(n + 2, 0), all3_(n + 2, 0) {
        all4_[n] = all3_[n] = 1;
        all4_[n + 1] = all3_[n + 1] = 0;
        for (int i = n - 1; i >= 0; --i) {
            const std::uint64_t pair4 = i + 2 <= n ? all4_[i + 2] : 0;
            const std::uint64_t pair3 = i + 2 <= n ? all3_[i + 2] : 0;
            all4_[i] = checked_add(checked_mul(4, all4_[i + 1]), pair4);
            all3_[i] = checked_add(checked_mul(3, all3_[i + 1]), pair3);
        }
    }

    TLNConfiguration draw(std::mt19937_64& rng) const {
        std::vector<Termination> terms(static_cast<std::size_t>(n_));
        bool need_thru = true;
        int i = 0;
        while (i < n_) {
            // Completions for the suffix starting at j.
            auto completions = [&](int j, bool need) -> std::uint64_t {
                if (j > n_) return 0;
                return need ? all4_[j] - all3_[j] : all4_[j];
            };
            const std::uint64_t w_load = completions(i + 1, need_thru);
            const std::uint64_t w_pair = i + 1 < n_ ? completions(i + 2, need_thru) : 0;
            const std::uint64_t w_thru = completions(i + 1, false);
            const std::uint64_t total = 3 * w_load + w_pair + w_thru;
            std::uniform_int_distribution<std::uint64_t> pick(0, total - 1);
            std::uint64_t u = pick(rng);
            if (u < 3 * w_load) {
                terms[static_cast<std::size_t>(i)] = static_cast<Termination>(u / w_load);
                i += 1;
            } else if ((u -= 3 * w_load) < w_pair) {
                terms[static_cast<std::size_t>(i)] = Termination::CoupledLeft;
                terms[static_cast<std::size_t>(i + 1)] = Termination::CoupledRight;
                i += 2;
            } else {
                terms[static_cast<std::size_t>(i)] = Termination::Thru;
                need_thru = false;
                i += 1;
            }
        }
        return TLNConfiguration(std::move(terms));
    }

private:
    int n_;
    std::vector<std::uint64_t> all4_;
    std::vector<std::uint64_t> all3_;
};

} // namespace

std::vector<TLNConfiguration> step1_series(int n_s, std::uint64_t seed) {
    require_positive(n_s);
    std::mt19937_64 rng(seed);
    std::vector<TLNConfiguration> series;
    for (auto t : {Termination::LoadA, Termination::LoadB, Termination::LoadC}) {
        series.push_back(TLNConfiguration::all(n_s, t));
    }
    // Pairs starting at even ports, then at odd ports: together every adjacent
    // pair (i, i+1) is used once. Unpaired ports get random individual loads.
    for (int offset = 0; offset < 2; ++offset) {
        if (n_s < 2 + offset) break;
        std::vector<Termination> terms(static_cast<std::size_t>(n_s));
        int i = 0;
        for (; i < offset; ++i) terms[static_cast<std::size_t>(i)] = random_load(rng);
        for (; i + 1 < n_s; i += 2) {
            terms[static_cast<std::size_t>(i)] = Termination::CoupledLeft;
            terms[static_cast<std::size_t>(i + 1)] = Termination::CoupledRight;
        }
        for (; i < n_s; ++i) terms[static_cast<std::size_t>(i)] = random_load(rng);
        series.emplace_back(std::move(terms));
    }
    return series;
}

std::vector<TLNConfiguration> step2_series(int n_s, int p, std::uint64_t seed, std::uint64_t cap) {
    require_positive(n_s);
    const std::uint64_t available = count_step2_configs(n_s);
    if (p < 1 || static_cast<std::uint64_t>(p) > available) {
        throw InvalidArgument("p = " + std::to_string(p) + " outside 1.." +
                              std::to_string(available) + " distinct Step-2 configurations for N_S = " +
                              std::to_string(n_s));
    }
    const auto all_thru = TLNConfiguration::all(n_s, Termination::Thru);
    std::vector<TLNConfiguration> series{all_thru};
    std::mt19937_64 rng(seed);

    if (available <= cap) {
        auto pool = enumerate_configs(n_s, Stage::Step2, cap);
        pool.erase(std::remove(pool.begin(), pool.end(), all_thru), pool.end());
        // Partial Fisher-Yates: the first p-1 slots become a uniform sample.
        for (std::size_t k = 0; k + 1 < static_cast<std::size_t>(p); ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
            std::swap(pool[k], pool[pick(rng)]);
            series.push_back(pool[k]);
        }
        return series;
    }

    Step2Sampler sampler(n_s);
    std::set<TLNConfiguration> seen{all_thru};
    while (series.size() < static_cast<std::size_t>(p)) {
        auto c = sampler.draw(rng);
        if (seen.insert(c).second) series.push_back(std::move(c));
    }
    return series;
}

} // namespace mxd
