#include "mxd/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <thread>
#include <tuple>

#include "mxd/random.hpp"

namespace mxd {

double effective_rank(std::span<const double> singular_values) {
    double total = 0.0;
    for (double s : singular_values) {
        if (!(s >= 0.0)) throw InvalidArgument("singular values must be non-negative");
        total += s;
    }
    if (!(total > 0.0)) throw InvalidArgument("effective rank of an all-zero spectrum is undefined");
    double entropy = 0.0;
    for (double s : singular_values) {
        const double q = s / total;
        if (q > 0.0) entropy -= q * std::log(q);
    }
    return std::exp(entropy);
}

RankReport jacobian_rank_at(const CVector& theta0, const MeasurementCampaign& campaign, std::string label) {
    const CMatrix jac = analytic_jacobian(theta0, campaign);
    if (jac.size() == 0) throw InvalidArgument("rank analysis needs at least one realization");
    const Eigen::JacobiSVD<CMatrix> svd(jac);
    const auto& sv = svd.singularValues();

    RankReport report;
    report.singular_values.assign(sv.data(), sv.data() + sv.size());
    report.effective_rank = effective_rank(report.singular_values);
    report.m = campaign.m();
    report.p = campaign.p();
    report.d = static_cast<int>(theta0.size());
    report.tx_rx_label = std::move(label);
    return report;
}

MseResult mse(const ScatteringMatrix& s_hat, const ScatteringMatrix& s_true) {
    if (s_hat.n_ports() != s_true.n_ports()) {
        throw DimensionError("mse: matrices have " + std::to_string(s_hat.n_ports()) + " and " +
                             std::to_string(s_true.n_ports()) + " ports");
    }
    MseResult out;
    if (s_true.n_ports() == 0) return out;
    out.raw = (s_hat.entries() - s_true.entries()).cwiseAbs2().mean();
    const double ref = s_true.entries().cwiseAbs2().mean();
    out.normalized = ref > 0.0 ? out.raw / ref : std::numeric_limits<double>::infinity();
    return out;
}

// Sweep ------------------------------------------------------------------------

namespace {

std::vector<IndexSet> combinations(const IndexSet& pool, int k) {
    std::vector<IndexSet> out;
    const int n = static_cast<int>(pool.size());
    if (k < 0 || k > n) return out;
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
        IndexSet c;
        for (int i : idx) c.push_back(pool[static_cast<std::size_t>(i)]);
        out.push_back(std::move(c));
        int i = k - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
        if (i < 0) break;
        ++idx[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
    return out;
}

std::string join(const IndexSet& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += '.';
        out += std::to_string(v[i]);
    }
    return out;
}

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

constexpr std::uint64_t kChoiceStream = 101;
constexpr std::uint64_t kRandomThetaStream = 102;

} // namespace

std::string tx_rx_label(const IndexSet& tx, const IndexSet& rx) { return "T" + join(tx) + "/R" + join(rx); }

std::vector<std::pair<IndexSet, IndexSet>> tx_rx_choices(const PortPartition& partition, int n_t, int n_r,
                                                         int max_choices, std::uint64_t seed) {
    if (n_t < 1 || n_t > partition.n_t() || n_r < 1 || n_r > partition.n_r()) {
        throw InvalidArgument("split " + std::to_string(n_t) + "x" + std::to_string(n_r) +
                              " incompatible with " + std::to_string(partition.n_t()) + " TX / " +
                              std::to_string(partition.n_r()) + " RX ports");
    }
    if (max_choices < 1) throw InvalidArgument("max_choices must be >= 1");
    std::vector<std::pair<IndexSet, IndexSet>> all;
    for (auto& t : combinations(partition.tx, n_t)) {
        for (auto& r : combinations(partition.rx, n_r)) all.emplace_back(t, r);
    }
    if (all.size() <= static_cast<std::size_t>(max_choices)) return all;

    std::mt19937_64 rng(derive_seed(derive_seed(seed, kChoiceStream), static_cast<std::uint64_t>(n_t * 1000 + n_r)));
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t k = 0; k < static_cast<std::size_t>(max_choices); ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, order.size() - 1);
        std::swap(order[k], order[pick(rng)]);
    }
    order.resize(static_cast<std::size_t>(max_choices));
    std::sort(order.begin(), order.end());
    std::vector<std::pair<IndexSet, IndexSet>> out;
    for (auto i : order) out.push_back(all[i]);
    return out;
}

SweepResult sweep(const Scenario& scenario, const SweepSettings& settings) {
    scenario.validate();
    if (settings.p_values.empty() || settings.splits.empty() || settings.seeds.empty()) {
        throw InvalidArgument("sweep needs non-empty p, split and seed lists");
    }
    for (int p : settings.p_values) {
        if (p < 1) throw InvalidArgument("sweep p values must be >= 1");
    }
    settings.estimator.validate();
    const int p_max = *std::max_element(settings.p_values.begin(), settings.p_values.end());

    struct Choice {
        int n_t, n_r;
        IndexSet tx, rx;
    };
    std::vector<Choice> choices;
    for (auto [n_t, n_r] : settings.splits) {
        for (auto& [t, r] : tx_rx_choices(scenario.partition, n_t, n_r, settings.max_choices, scenario.seed)) {
            choices.push_back({n_t, n_r, t, r});
        }
    }

    // One full-aperture campaign per seed; every cell is a restriction of it.
    std::vector<MeasurementCampaign> full(settings.seeds.size());
    std::vector<std::string> seed_error(settings.seeds.size());
    parallel_for(settings.seeds.size(), settings.jobs, [&](std::size_t i) {
        try {
            Scenario sc = scenario;
            sc.seed = settings.seeds[i];
            const auto series = step2_series(scenario.n_s(), p_max, settings.seeds[i]);
            full[i] = simulate_campaign(sc, series, scenario.partition.tx, scenario.partition.rx);
        } catch (const std::exception& e) {
            seed_error[i] = e.what();
        }
    });

    const CVector theta_true = upper_triangle(scenario.s_dut_true.entries());
    const std::size_t n_p = settings.p_values.size();
    const std::size_t n_cells = choices.size() * settings.seeds.size() * n_p;
    std::vector<SweepRow> rows(n_cells);
    parallel_for(n_cells, settings.jobs, [&](std::size_t cell) {
        const std::size_t pi = cell % n_p;
        const std::size_t si = (cell / n_p) % settings.seeds.size();
        const std::size_t ci = cell / (n_p * settings.seeds.size());
        const auto& ch = choices[ci];
        SweepRow& row = rows[cell];
        row.n_t = ch.n_t;
        row.n_r = ch.n_r;
        row.n_a = ch.n_t + ch.n_r;
        row.m = ch.n_t * ch.n_r;
        row.p = settings.p_values[pi];
        row.tx_rx = tx_rx_label(ch.tx, ch.rx);
        row.seed = settings.seeds[si];
        row.effective_rank = std::numeric_limits<double>::quiet_NaN();
        row.mse = std::numeric_limits<double>::quiet_NaN();
        row.mse_normalized = std::numeric_limits<double>::quiet_NaN();
        if (!seed_error[si].empty()) {
            row.error = seed_error[si];
            return;
        }
        try {
            const auto campaign = extract_submatrix_campaign(full[si], ch.tx, ch.rx).prefix(row.p);
            CVector theta0 = theta_true;
            if (settings.rank_point == RankPoint::Random) {
                theta0 = upper_triangle(
                    random_passive_reciprocal(scenario.n_s(), derive_seed(row.seed, kRandomThetaStream), 0.9)
                        .entries());
            }
            row.effective_rank = jacobian_rank_at(theta0, campaign, row.tx_rx).effective_rank;
            if (settings.run_estimate) {
                EstimatorSettings est = settings.estimator;
                est.seed = row.seed;
                const auto rep = estimate(campaign, est);
                const auto err = mse(rep.s_dut_hat, scenario.s_dut_true);
                row.mse = err.raw;
                row.mse_normalized = err.normalized;
            }
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });

    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return std::tie(a.m, a.p, a.tx_rx, a.seed) < std::tie(b.m, b.p, b.tx_rx, b.seed);
    });
    return SweepResult{std::move(rows)};
}

std::vector<AggregateRow> SweepResult::aggregate() const {
    struct Acc {
        double r_sum = 0, r_min = 0, r_max = 0, e_sum = 0, e_min = 0, e_max = 0;
        int r_n = 0, e_n = 0;
    };
    std::map<std::pair<int, int>, Acc> groups;
    for (const auto& row : rows) {
        auto& a = groups[{row.m, row.p}];
        if (std::isfinite(row.effective_rank)) {
            a.r_min = a.r_n ? std::min(a.r_min, row.effective_rank) : row.effective_rank;
            a.r_max = a.r_n ? std::max(a.r_max, row.effective_rank) : row.effective_rank;
            a.r_sum += row.effective_rank;
            ++a.r_n;
        }
        if (std::isfinite(row.mse)) {
            a.e_min = a.e_n ? std::min(a.e_min, row.mse) : row.mse;
            a.e_max = a.e_n ? std::max(a.e_max, row.mse) : row.mse;
            a.e_sum += row.mse;
            ++a.e_n;
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<AggregateRow> out;
    for (const auto& [key, a] : groups) {
        const auto [m, p] = key;
        out.push_back({m, p, "mean", a.r_n ? a.r_sum / a.r_n : nan, a.e_n ? a.e_sum / a.e_n : nan});
        out.push_back({m, p, "min", a.r_n ? a.r_min : nan, a.e_n ? a.e_min : nan});
        out.push_back({m, p, "max", a.r_n ? a.r_max : nan, a.e_n ? a.e_max : nan});
    }
    return out;
}

} // namespace mxd
