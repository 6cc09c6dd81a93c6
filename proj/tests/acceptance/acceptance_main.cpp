// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "mxd/random.hpp"
#include "mxd/serialization.hpp"
#include "mxd/touchstone.hpp"
#include "oracle.hpp"

using namespace mxd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

// Scenario with n_t TX and n_r RX ports.
Scenario scenario_for(int n_s, int n_t, int n_r, std::uint64_t seed) {
    return make_synthetic_scenario(n_s, n_t + n_r, n_t, seed);
}

MeasurementCampaign full_campaign(const Scenario& sc, int p, std::uint64_t seed) {
    return simulate_campaign(sc, step2_series(sc.n_s(), p, seed), sc.partition.tx, sc.partition.rx);
}

PFRealization as_fixture(const CMatrix& s, int first_side) {
    const int n2 = static_cast<int>(s.rows()) - first_side;
    const IndexSet a = iota_set(first_side);
    const IndexSet b = iota_set(n2, first_side);
    return {select(s, a, a), select(s, a, b), select(s, b, a), select(s, b, b), ""};
}

// 1 -----------------------------------------------------------------------------
Outcome jacobian_vs_fd() {
    int instances = 0;
    double worst = 0.0;
    std::uint64_t seed = 0;
    for (int n_s : {2, 3, 4}) {
        for (int k : {1, 2, 3, 4}) { // m = k^2
            for (int p : {1, 5, 30}) {
                if (p > static_cast<int>(count_step2_configs(n_s))) continue;
                for (int rep = 0; rep < 2; ++rep, ++seed) {
                    const auto sc = scenario_for(n_s, k, k, 1000 + seed);
                    const auto c = full_campaign(sc, p, 1000 + seed);
                    const CVector theta = upper_triangle(random_passive_reciprocal(n_s, 5000 + seed, 0.9).entries());
                    const CMatrix ja = analytic_jacobian(theta, c);
                    const CMatrix fd = fd_jacobian(theta, c, 1e-5);
                    worst = std::max(worst, max_abs(ja - fd) / max_abs(ja));
                    ++instances;
                }
            }
        }
    }
    return {instances >= 50 && worst < 1e-6,
            std::to_string(instances) + " instances, worst relative error " + fmt(worst)};
}

// 2 -----------------------------------------------------------------------------
Outcome cascade_associativity() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        const int n_a = 2 + static_cast<int>(rng() % 7);
        const int n_s = 1 + static_cast<int>(rng() % 4);
        const auto cfgs = enumerate_configs(n_s, Stage::Step2);
        const auto tln = synthesize_tln(cfgs[rng() % cfgs.size()], {});
        const auto ota = random_passive_reciprocal(n_a + n_s, derive_seed(seed, 0), 0.95);
        const auto dut = random_passive_reciprocal(n_s, derive_seed(seed, 1), 0.9);
        const auto part = PortPartition::standard(n_a, n_s, n_a / 2);
        const auto left = measurable_s(compose_pf(ota, tln, part), dut);
        const auto load = measurable_s(as_fixture(tln.entries(), n_s), dut);
        const auto right = measurable_s(as_fixture(ota.entries(), n_a), load);
        worst = std::max(worst, max_abs(left.entries() - right.entries()));
    }
    return {worst < 1e-10, "100 instances, max elementwise error " + fmt(worst)};
}

// 3 -----------------------------------------------------------------------------
Outcome counting() {
    const std::uint64_t s1[] = {3, 10, 33, 109};
    const std::uint64_t s2[] = {1, 7, 39, 196};
    bool ok = true;
    std::ostringstream d;
    for (int n = 1; n <= 6; ++n) {
        const auto brute = oracle::brute_force_counts(n);
        const auto c1 = count_step1_configs(n);
        const auto c2 = count_step2_configs(n);
        ok = ok && c1 == brute.step1 && c2 == brute.step2;
        ok = ok && enumerate_configs(n, Stage::Step1).size() == c1 && enumerate_configs(n, Stage::Step2).size() == c2;
        if (n <= 4) ok = ok && c1 == s1[n - 1] && c2 == s2[n - 1];
        d << (n > 1 ? " " : "") << n << ":" << c1 << "/" << c2;
    }
    return {ok, "N_S step1/step2 " + d.str()};
}

// 4 -----------------------------------------------------------------------------
Outcome rank_bounds() {
    int reports = 0;
    bool bounds_ok = true;
    double siso_dev = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto sc = make_synthetic_scenario(4, 8, 4, 200 + seed);
        const auto full = full_campaign(sc, 30, 200 + seed);
        const CVector truth = upper_triangle(sc.s_dut_true.entries());
        for (int k : {1, 2, 3, 4}) {
            for (const auto& [tx, rx] : tx_rx_choices(sc.partition, k, k, 4, seed)) {
                const auto c = extract_submatrix_campaign(full, tx, rx);
                for (int p : {1, 2, 5, 10, 30}) {
                    const auto r = jacobian_rank_at(truth, c.prefix(p));
                    ++reports;
                    const double cap = std::min(r.m * r.p, 10);
                    bounds_ok = bounds_ok && r.effective_rank >= 1.0 - 1e-12 && r.effective_rank <= cap + 1e-12;
                    if (r.m == 1 && r.p == 1) siso_dev = std::max(siso_dev, std::abs(r.effective_rank - 1.0));
                }
            }
        }
    }
    return {bounds_ok && siso_dev <= 1e-9,
            std::to_string(reports) + " reports within bounds: " + (bounds_ok ? "yes" : "no") +
                ", max |R - 1| at m=1,p=1: " + fmt(siso_dev)};
}

// 5 -----------------------------------------------------------------------------
Outcome diversity_trend() {
    std::map<int, std::pair<double, double>> sum; // m -> (p=1, p=30)
    std::map<int, int> n;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto sc = make_synthetic_scenario(4, 8, 4, 300 + s);
        SweepSettings st;
        st.p_values = {1, 30};
        st.splits = {{1, 1}, {2, 2}, {3, 3}};
        st.seeds = {s};
        st.run_estimate = false;
        for (const auto& r : sweep(sc, st).rows) {
            if (!r.error.empty()) return {false, "sweep row failed: " + r.error};
            (r.p == 1 ? sum[r.m].first : sum[r.m].second) += r.effective_rank;
            if (r.p == 1) ++n[r.m];
        }
    }
    bool ok = true;
    std::ostringstream d;
    for (int m : {1, 4, 9}) {
        const double r1 = sum[m].first / n[m];
        const double r30 = sum[m].second / n[m];
        ok = ok && r30 > r1;
        d << "m=" << m << ": R(p=1)=" << fmt(r1) << " R(p=30)=" << fmt(r30) << "; ";
    }
    const double siso30 = sum[1].second / n[1];
    ok = ok && siso30 >= 5.0;
    d << "10 scenarios, " << n[1] << " SISO cells";
    return {ok, d.str()};
}

// 6 -----------------------------------------------------------------------------
Outcome identifiability() {
    const auto sc = make_synthetic_scenario(4, 8, 4, 0);
    const auto full = full_campaign(sc, 30, 0);
    const auto nmse = [&](const MeasurementCampaign& c) { return mse(estimate(c).s_dut_hat, sc.s_dut_true).normalized; };
    const double a = nmse(full.prefix(1));
    const auto siso = extract_submatrix_campaign(full, {0}, {4});
    const double b = nmse(siso.prefix(1));
    const double c = nmse(siso);
    return {a < 1e-8 && b > 1e-1 && c < 1e-2,
            "normalized MSE m=16,p=1: " + fmt(a) + "; m=1,p=1: " + fmt(b) + "; m=1,p=30: " + fmt(c)};
}

// 7 -----------------------------------------------------------------------------
Outcome noise_robustness() {
    std::vector<double> full1, siso1, siso30;
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto sc = make_synthetic_scenario(4, 8, 4, 400 + s);
        sc.snr_db = 62.3;
        sc.ota_knowledge_error_db = 46.5;
        const auto full = full_campaign(sc, 30, 400 + s);
        const auto siso = extract_submatrix_campaign(full, {0}, {4});
        const auto nmse = [&](const MeasurementCampaign& c) {
            return mse(estimate(c).s_dut_hat, sc.s_dut_true).normalized;
        };
        full1.push_back(nmse(full.prefix(1)));
        siso1.push_back(nmse(siso.prefix(1)));
        siso30.push_back(nmse(siso));
    }
    const double a = median(full1);
    const double b = median(siso1);
    const double c = median(siso30);
    return {100.0 * a <= b && 10.0 * c <= b,
            "median normalized MSE m=16,p=1: " + fmt(a) + "; m=1,p=1: " + fmt(b) + "; m=1,p=30: " + fmt(c)};
}

// 8 -----------------------------------------------------------------------------
Outcome loss_contract() {
    double worst_truth = 0.0;
    bool ones = true;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto sc = make_synthetic_scenario(4, 8, 4, 500 + s);
        const auto full = full_campaign(sc, 30, 500 + s);
        for (const auto& c : {full, extract_submatrix_campaign(full, {1}, {6})}) {
            worst_truth = std::max(worst_truth, loss(upper_triangle(sc.s_dut_true.entries()), c));
            // theta = 0 makes the predicted H equal to S_RT.
            ones = ones && loss(CVector::Zero(10), c) == 1.0;
        }
    }
    return {worst_truth < 1e-12 && ones,
            "max loss at truth " + fmt(worst_truth) + ", loss at direct-path prediction == 1: " + (ones ? "yes" : "no")};
}

// 9 -----------------------------------------------------------------------------
Outcome io_round_trips() {
    std::mt19937_64 rng(99);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        TouchstoneDocument doc;
        doc.n_ports = 1 + static_cast<int>(rng() % 8);
        doc.format = static_cast<TouchstoneFormat>(rng() % 3);
        std::uniform_real_distribution<double> u(0.01, 1.0);
        double f = 1e9;
        for (int k = 0; k < 3; ++k) {
            CMatrix s(doc.n_ports, doc.n_ports);
            for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::polar(u(rng), 6.0 * u(rng) - 3.0);
            doc.frequency_points.emplace_back(f, s);
            f += 1e8;
        }
        const auto once = parse_touchstone(write_touchstone(doc));
        const auto twice = parse_touchstone(write_touchstone(once));
        for (std::size_t k = 0; k < doc.frequency_points.size(); ++k) {
            worst = std::max(worst, max_abs(once.frequency_points[k].second - doc.frequency_points[k].second));
            worst = std::max(worst, max_abs(twice.frequency_points[k].second - once.frequency_points[k].second));
        }
    }
    auto sc = make_synthetic_scenario(4, 8, 4, 600);
    sc.snr_db = 62.3;
    sc.ota_knowledge_error_db = 46.5;
    const auto c = full_campaign(sc, 30, 600);
    const auto path = fs::temp_directory_path() / "mxd_acceptance.campaign.json";
    save_campaign(path, c, &sc);
    const auto back = load_campaign(path).campaign;
    fs::remove(path);
    bool identical = back.p() == c.p() && back.tx == c.tx && back.rx == c.rx && back.configs == c.configs;
    for (int r = 0; identical && r < c.p(); ++r) {
        const auto k = static_cast<std::size_t>(r);
        identical = back.h_meas[k] == c.h_meas[k] && back.pf_known[k].assembled() == c.pf_known[k].assembled();
    }
    return {worst <= 1e-12 && identical,
            "Touchstone max deviation " + fmt(worst) + " over 100 documents; campaign bit-identical: " +
                (identical ? "yes" : "no")};
}

// 10 ----------------------------------------------------------------------------
Outcome sweep_determinism() {
    const auto dir = fs::temp_directory_path() / "mxd_acceptance_sweep";
    fs::remove_all(dir);
    std::ostringstream sink;
    const std::string scenario = (dir / "s.json").string();
    if (cli::run({"generate", "--n-s", "4", "--n-a", "8", "--seed", "7", "-o", scenario}, sink, sink) != 0) {
        return {false, "generate failed: " + sink.str()};
    }
    std::vector<std::string> files;
    for (const char* jobs : {"1", "8"}) {
        const std::string out = (dir / (std::string("jobs") + jobs + ".csv")).string();
        const int rc = cli::run({"sweep", "-s", scenario, "--p", "1,2,5", "--splits", "1x1,2x2", "--seeds", "0,1",
                                 "--max-iters", "400", "--restarts", "2", "--jobs", jobs, "-o", out},
                                sink, sink);
        if (rc != 0) return {false, "sweep failed: " + sink.str()};
        files.push_back(read_text_file(out));
        files.push_back(read_text_file(fs::path(out).replace_extension(".aggregate.csv")));
    }
    fs::remove_all(dir);
    const bool same = files[0] == files[2] && files[1] == files[3];
    const auto lines = std::count(files[0].begin(), files[0].end(), '\n');
    return {same, std::to_string(lines - 1) + " rows; row and aggregate CSVs byte-identical: " + (same ? "yes" : "no")};
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "Jacobian correctness", 60, jacobian_vs_fd},
        {2, "Cascade associativity", 10, cascade_associativity},
        {3, "Counting formulas", 30, counting},
        {4, "Rank bounds and SISO floor", 10, rank_bounds},
        {5, "Diversity trend", 300, diversity_trend},
        {6, "Identifiability phase change", 600, identifiability},
        {7, "Noise robustness", 600, noise_robustness},
        {8, "Loss contract", 1e9, loss_contract},
        {9, "I/O round-trips", 10, io_round_trips},
        {10, "Sweep determinism across job counts", 1e9, sweep_determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = o.pass && in_time;
        failed += pass ? 0 : 1;
        std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << o.detail
                  << " [" << fmt(secs) << " s" << (in_time ? "" : ", over budget") << "]" << std::endl;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
