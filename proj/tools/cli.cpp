#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "mxd/serialization.hpp"
#include "mxd/text.hpp"

namespace mxd::cli {

namespace fs = std::filesystem;

namespace {

// Thrown for argument values that CLI11 accepts syntactically but we reject.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fs::path output_path(const std::string& p) {
    fs::path path(p);
    if (path.is_relative()) {
        if (const char* dir = std::getenv("MXD_OUTPUT_DIR"); dir && *dir) return fs::path(dir) / path;
    }
    return path;
}

double parse_db(const std::string& s) {
    if (s == "inf" || s == "none") return kNoiseless;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw UsageError("invalid dB value '" + s + "'");
    return v;
}

template <class T>
T parse_int(const std::string& s, const char* what) {
    T v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw UsageError(std::string("invalid ") + what + " '" + s + "'");
    }
    return v;
}

// "1,2,5-8" -> 1 2 5 6 7 8
template <class T>
std::vector<T> parse_list(const std::vector<std::string>& items, const char* what) {
    std::vector<T> out;
    for (const auto& item : items) {
        const auto dash = item.find('-', 1);
        if (dash == std::string::npos) {
            out.push_back(parse_int<T>(item, what));
            continue;
        }
        const T lo = parse_int<T>(item.substr(0, dash), what);
        const T hi = parse_int<T>(item.substr(dash + 1), what);
        if (hi < lo) throw UsageError(std::string("empty ") + what + " range '" + item + "'");
        for (T v = lo; v <= hi; ++v) out.push_back(v);
    }
    return out;
}

std::vector<std::pair<int, int>> parse_splits(const std::vector<std::string>& items) {
    std::vector<std::pair<int, int>> out;
    for (const auto& item : items) {
        const auto x = item.find('x');
        if (x == std::string::npos) throw UsageError("split '" + item + "' must look like 2x2");
        out.emplace_back(parse_int<int>(item.substr(0, x), "split"), parse_int<int>(item.substr(x + 1), "split"));
    }
    return out;
}

// "re,im"
complex parse_complex(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw UsageError("complex value '" + s + "' must be written re,im");
    double re = 0.0;
    double im = 0.0;
    const auto a = std::from_chars(s.data(), s.data() + comma, re);
    const auto b = std::from_chars(s.data() + comma + 1, s.data() + s.size(), im);
    if (a.ec != std::errc() || a.ptr != s.data() + comma || b.ec != std::errc() || b.ptr != s.data() + s.size()) {
        throw UsageError("complex value '" + s + "' must be written re,im");
    }
    return {re, im};
}

struct HwOptions {
    std::string gamma_a, gamma_b, gamma_c, thru_s21, thru_s11, thru_s22, coupled_s21, coupled_s11, idle;

    void add(CLI::App* cmd) {
        cmd->add_option("--gamma-a", gamma_a, "TLN load A reflection (re,im)");
        cmd->add_option("--gamma-b", gamma_b, "TLN load B reflection (re,im)");
        cmd->add_option("--gamma-c", gamma_c, "TLN load C reflection (re,im)");
        cmd->add_option("--thru-s21", thru_s21, "Thru transmission (re,im)");
        cmd->add_option("--thru-s11", thru_s11, "Thru OTA-side reflection (re,im)");
        cmd->add_option("--thru-s22", thru_s22, "Thru DUT-side reflection (re,im)");
        cmd->add_option("--coupled-s21", coupled_s21, "Coupled-load transmission (re,im)");
        cmd->add_option("--coupled-s11", coupled_s11, "Coupled-load reflection (re,im)");
        cmd->add_option("--idle-dut-reflection", idle, "Reflection seen by an unconnected DUT port (re,im)");
    }

    void apply(TLNHardwareModel& hw) const {
        auto set = [](const std::string& s, complex& v) {
            if (!s.empty()) v = parse_complex(s);
        };
        set(gamma_a, hw.gamma_a);
        set(gamma_b, hw.gamma_b);
        set(gamma_c, hw.gamma_c);
        set(thru_s21, hw.thru_s21);
        set(thru_s11, hw.thru_s11);
        set(thru_s22, hw.thru_s22);
        set(coupled_s21, hw.coupled_s21);
        set(coupled_s11, hw.coupled_s11);
        set(idle, hw.idle_dut_reflection);
    }
};

void add_estimator_options(CLI::App* cmd, EstimatorSettings& st) {
    cmd->add_option("--initial-step", st.initial_step, "Adam initial step size")->capture_default_str();
    cmd->add_option("--decay", st.decay, "Per-iteration step decay factor")->capture_default_str();
    cmd->add_option("--beta1", st.adam_beta1, "Adam first-moment decay")->capture_default_str();
    cmd->add_option("--beta2", st.adam_beta2, "Adam second-moment decay")->capture_default_str();
    cmd->add_option("--epsilon", st.adam_epsilon, "Adam epsilon")->capture_default_str();
    cmd->add_option("--max-iters", st.max_iters, "Iterations per restart")->capture_default_str();
    cmd->add_option("--loss-tolerance", st.loss_tolerance, "Stop once the loss is below this")->capture_default_str();
    cmd->add_option("--restarts", st.n_restarts, "Random restarts")->capture_default_str();
    cmd->add_option("--init-scale", st.init_scale, "Std. deviation of the random start")->capture_default_str();
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

// Commands -------------------------------------------------------------------

struct GenerateArgs {
    int n_s = 4;
    int n_a = 8;
    int n_tx = -1;
    std::uint64_t seed = 0;
    std::string snr_db = "inf";
    std::string ota_error_db = "inf";
    double ota_norm_cap = 0.95;
    double dut_norm_cap = 0.9;
    HwOptions hw;
    std::string out;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    auto sc = make_synthetic_scenario(a.n_s, a.n_a, a.n_tx < 0 ? a.n_a / 2 : a.n_tx, a.seed, a.ota_norm_cap,
                                      a.dut_norm_cap);
    sc.snr_db = parse_db(a.snr_db);
    sc.ota_knowledge_error_db = parse_db(a.ota_error_db);
    a.hw.apply(sc.hw);
    sc.validate();
    const auto path = output_path(a.out);
    save_scenario(path, sc);
    out << "scenario n_s=" << sc.n_s() << " n_a=" << sc.n_a() << " -> " << path.string() << "\n";
    return kOk;
}

struct SimulateArgs {
    std::string scenario;
    int p = 30;
    std::vector<int> tx, rx;
    std::string snr_db, ota_error_db;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    auto sc = load_scenario(a.scenario);
    if (!a.snr_db.empty()) sc.snr_db = parse_db(a.snr_db);
    if (!a.ota_error_db.empty()) sc.ota_knowledge_error_db = parse_db(a.ota_error_db);
    if (a.seed) sc.seed = *a.seed;
    sc.validate();
    const IndexSet tx = a.tx.empty() ? sc.partition.tx : IndexSet(a.tx.begin(), a.tx.end());
    const IndexSet rx = a.rx.empty() ? sc.partition.rx : IndexSet(a.rx.begin(), a.rx.end());
    const auto series = step2_series(sc.n_s(), a.p, sc.seed);
    const auto c = simulate_campaign(sc, series, tx, rx);
    const auto path = output_path(a.out);
    save_campaign(path, c, &sc);
    out << "campaign m=" << c.m() << " p=" << c.p() << " measurements=" << c.m() * c.p() << " -> "
        << path.string() << "\n";
    return kOk;
}

struct EstimateArgs {
    std::string campaign;
    EstimatorSettings settings;
    std::string out;
    std::string trace;
};

int cmd_estimate(const EstimateArgs& a, std::ostream& out) {
    const auto file = load_campaign(a.campaign);
    const auto rep = estimate(file.campaign, a.settings);
    std::optional<MseResult> err;
    if (file.scenario) err = mse(rep.s_dut_hat, file.scenario->s_dut_true);
    const auto path = output_path(a.out);
    save_report(path, rep, err);
    const fs::path trace = a.trace.empty() ? fs::path(path.string() + ".loss_trace.csv") : output_path(a.trace);
    write_text_file(trace, loss_trace_csv(rep.loss_trace));
    out << "final_loss=" << format_double(rep.final_loss) << " converged=" << yes_no(rep.converged)
        << " best_restart=" << rep.best_restart << "\n";
    if (err) out << "mse=" << format_double(err->raw) << " mse_normalized=" << format_double(err->normalized) << "\n";
    for (const auto& w : rep.warnings) out << "warning: " << w << "\n";
    return kOk;
}

struct RankArgs {
    std::string campaign;
    std::string theta0 = "truth";
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_rank(const RankArgs& a, std::ostream& out) {
    const auto file = load_campaign(a.campaign);
    const auto& c = file.campaign;
    CVector theta0;
    if (a.theta0 == "truth") {
        if (!file.scenario) throw UsageError("--theta0 truth needs a campaign file that embeds its scenario");
        theta0 = upper_triangle(file.scenario->s_dut_true.entries());
    } else {
        theta0 = upper_triangle(random_passive_reciprocal(c.n_s, a.seed, 0.9).entries());
    }
    const auto rep = jacobian_rank_at(theta0, c, tx_rx_label(c.tx, c.rx));
    const auto path = output_path(a.out);
    write_text_file(path, rank_csv(rep));
    out << "effective_rank=" << format_double(rep.effective_rank) << " m=" << rep.m << " p=" << rep.p
        << " d=" << rep.d << "\n";
    return kOk;
}

struct SweepArgs {
    std::string scenario;
    std::string preset;
    std::vector<std::string> p_values, splits, seeds;
    int max_choices = 16;
    std::string rank_point = "truth";
    bool skip_estimate = false;
    EstimatorSettings settings;
    int jobs = 1;
    std::string out;
    std::string aggregate;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
    Scenario sc;
    SweepSettings st;
    if (a.preset == "paper-desk") {
        sc = make_synthetic_scenario(4, 8, 4, 0);
        st.p_values.clear();
        for (int p = 1; p <= 30; ++p) st.p_values.push_back(p);
        st.splits = {{1, 1}, {2, 2}, {3, 3}, {4, 4}};
        st.seeds = {0, 1, 2, 3, 4};
    } else if (!a.preset.empty()) {
        throw UsageError("unknown preset '" + a.preset + "'");
    }
    if (!a.scenario.empty()) {
        sc = load_scenario(a.scenario);
    } else if (a.preset.empty()) {
        throw UsageError("sweep needs --scenario or --preset");
    }
    if (!a.p_values.empty()) st.p_values = parse_list<int>(a.p_values, "p");
    if (!a.splits.empty()) st.splits = parse_splits(a.splits);
    if (!a.seeds.empty()) st.seeds = parse_list<std::uint64_t>(a.seeds, "seed");
    st.max_choices = a.max_choices;
    st.rank_point = a.rank_point == "random" ? RankPoint::Random : RankPoint::Truth;
    st.run_estimate = !a.skip_estimate;
    st.estimator = a.settings;
    st.jobs = a.jobs;

    const auto res = sweep(sc, st);
    const auto rows_path = output_path(a.out);
    fs::path agg_path;
    if (!a.aggregate.empty()) {
        agg_path = output_path(a.aggregate);
    } else {
        agg_path = rows_path;
        agg_path.replace_extension(".aggregate.csv");
    }
    write_text_file(rows_path, sweep_csv(res));
    write_text_file(agg_path, aggregate_csv(res.aggregate()));
    std::size_t failed = 0;
    for (const auto& r : res.rows) failed += r.error.empty() ? 0 : 1;
    out << "rows=" << res.rows.size() << " failed=" << failed << " -> " << rows_path.string() << ", "
        << agg_path.string() << "\n";
    return kOk;
}

int cmd_count(int n_s, std::ostream& out) {
    const auto s1 = count_step1_configs(n_s);
    const auto s2 = count_step2_configs(n_s);
    std::string verified = "skipped";
    if (n_s <= 6) {
        const bool ok = enumerate_configs(n_s, Stage::Step1).size() == s1 &&
                        enumerate_configs(n_s, Stage::Step2).size() == s2;
        verified = yes_no(ok);
    }
    out << "step1=" << s1 << " step2=" << s2 << " verified=" << verified << "\n";
    return verified == "no" ? kNumericalFailure : kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multiplexed de-embedding of a device behind a reconfigurable fixture"};
    app.name("mxd");
    app.set_config("--config", "", "Read options from a TOML or INI file (sections per subcommand)");
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* c_gen = app.add_subcommand("generate", "Create a synthetic scenario file");
    c_gen->add_option("--n-s", gen.n_s, "DUT ports")->capture_default_str()->check(CLI::PositiveNumber);
    c_gen->add_option("--n-a", gen.n_a, "Accessible antenna ports")->capture_default_str()->check(CLI::Range(2, 64));
    c_gen->add_option("--n-tx", gen.n_tx, "Transmitting ports (default n-a/2)");
    c_gen->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    c_gen->add_option("--snr-db", gen.snr_db, "Measurement SNR in dB, or inf")->capture_default_str();
    c_gen->add_option("--ota-error-db", gen.ota_error_db, "OTA knowledge error level in dB, or inf")
        ->capture_default_str();
    c_gen->add_option("--ota-norm-cap", gen.ota_norm_cap, "Spectral norm cap of S^OTA")->capture_default_str();
    c_gen->add_option("--dut-norm-cap", gen.dut_norm_cap, "Spectral norm cap of S^DUT")->capture_default_str();
    gen.hw.add(c_gen);
    c_gen->add_option("--out,-o", gen.out, "Scenario file to write")->required();

    SimulateArgs sim;
    std::uint64_t sim_seed = 0;
    auto* c_sim = app.add_subcommand("simulate", "Simulate a Step-2 measurement campaign");
    c_sim->add_option("--scenario,-s", sim.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    c_sim->add_option("--p", sim.p, "PF realizations")->capture_default_str()->check(CLI::PositiveNumber);
    c_sim->add_option("--tx", sim.tx, "TX accessible ports (default: scenario TX set)")->delimiter(',');
    c_sim->add_option("--rx", sim.rx, "RX accessible ports (default: scenario RX set)")->delimiter(',');
    c_sim->add_option("--snr-db", sim.snr_db, "Override measurement SNR in dB, or inf");
    c_sim->add_option("--ota-error-db", sim.ota_error_db, "Override OTA knowledge error in dB, or inf");
    auto* sim_seed_opt = c_sim->add_option("--seed", sim_seed, "Seed for the series and noise (default: scenario)");
    c_sim->add_option("--out,-o", sim.out, "Campaign file to write")->required();

    EstimateArgs est;
    auto* c_est = app.add_subcommand("estimate", "Estimate S^DUT from a campaign file");
    c_est->add_option("--campaign,-c", est.campaign, "Campaign file")->required()->check(CLI::ExistingFile);
    add_estimator_options(c_est, est.settings);
    c_est->add_option("--seed", est.settings.seed, "Seed for the random starts")->capture_default_str();
    c_est->add_option("--out,-o", est.out, "Report file to write")->required();
    c_est->add_option("--trace", est.trace, "Loss-trace CSV (default: <out>.loss_trace.csv)");

    RankArgs rk;
    auto* c_rank = app.add_subcommand("rank", "Jacobian singular values and effective rank");
    c_rank->add_option("--campaign,-c", rk.campaign, "Campaign file")->required()->check(CLI::ExistingFile);
    c_rank->add_option("--theta0", rk.theta0, "Linearisation point")
        ->capture_default_str()
        ->check(CLI::IsMember({"truth", "random"}));
    c_rank->add_option("--seed", rk.seed, "Seed for --theta0 random")->capture_default_str();
    c_rank->add_option("--out,-o", rk.out, "Rank CSV to write")->required();

    SweepArgs sw;
    auto* c_sweep = app.add_subcommand("sweep", "Rank and MSE over TX/RX splits and realization counts");
    c_sweep->add_option("--scenario,-s", sw.scenario, "Scenario file")->check(CLI::ExistingFile);
    c_sweep->add_option("--preset", sw.preset, "Named experiment grid")->check(CLI::IsMember({"paper-desk"}));
    c_sweep->add_option("--p", sw.p_values, "Realization counts, e.g. 1,5,10-12")->delimiter(',');
    c_sweep->add_option("--splits", sw.splits, "TX x RX splits, e.g. 1x1,2x2")->delimiter(',');
    c_sweep->add_option("--seeds", sw.seeds, "Seeds, e.g. 0-4")->delimiter(',');
    c_sweep->add_option("--max-choices", sw.max_choices, "TX/RX choices per split")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    c_sweep->add_option("--rank-point", sw.rank_point, "Linearisation point")
        ->capture_default_str()
        ->check(CLI::IsMember({"truth", "random"}));
    c_sweep->add_flag("--skip-estimate", sw.skip_estimate, "Rank only; leave the MSE columns empty");
    add_estimator_options(c_sweep, sw.settings);
    c_sweep->add_option("--jobs,-j", sw.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    c_sweep->add_option("--out,-o", sw.out, "Row CSV to write")->required();
    c_sweep->add_option("--aggregate", sw.aggregate, "Aggregate CSV (default: <out stem>.aggregate.csv)");

    int count_n = 0;
    auto* c_count = app.add_subcommand("count", "Count TLN configurations");
    c_count->add_option("n_s", count_n, "DUT ports")->required()->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return kUsage;
    }

    try {
        if (c_gen->parsed()) return cmd_generate(gen, out);
        if (c_sim->parsed()) {
            if (sim_seed_opt->count() > 0) sim.seed = sim_seed;
            return cmd_simulate(sim, out);
        }
        if (c_est->parsed()) return cmd_estimate(est, out);
        if (c_rank->parsed()) return cmd_rank(rk, out);
        if (c_sweep->parsed()) return cmd_sweep(sw, out);
        if (c_count->parsed()) return cmd_count(count_n, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\nrun 'mxd --help' for usage\n";
        return kUsage;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\nrun 'mxd --help' for usage\n";
        return kUsage;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kNumericalFailure;
    }
    return kUsage;
}

} // namespace mxd::cli
