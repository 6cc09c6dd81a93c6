#include "mxd/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "mxd/text.hpp"

namespace mxd {

using nlohmann::json;

namespace {

// Writing -------------------------------------------------------------------------

double finite(double v, const char* what) {
    if (!std::isfinite(v)) throw InvalidArgument(std::string("cannot serialise non-finite ") + what);
    return v;
}

json to_j(complex z) { return json::array({finite(z.real(), "value"), finite(z.imag(), "value")}); }

json to_j(const CMatrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(to_j(m(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_j(const CVector& v) {
    json out = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(to_j(v(k)));
    return out;
}

/// Infinite dB values (channel disabled) are written as null.
json db_to_j(double db) { return std::isfinite(db) ? json(db) : json(nullptr); }

json hw_to_j(const TLNHardwareModel& hw) {
    return {{"gamma_a", to_j(hw.gamma_a)},         {"gamma_b", to_j(hw.gamma_b)},
            {"gamma_c", to_j(hw.gamma_c)},         {"thru_s21", to_j(hw.thru_s21)},
            {"thru_s11", to_j(hw.thru_s11)},       {"thru_s22", to_j(hw.thru_s22)},
            {"coupled_s21", to_j(hw.coupled_s21)}, {"coupled_s11", to_j(hw.coupled_s11)},
            {"idle_dut_reflection", to_j(hw.idle_dut_reflection)}};
}

json scenario_to_j(const Scenario& s) {
    return {{"schema_version", kSchemaVersion},
            {"kind", "scenario"},
            {"n_s", s.n_s()},
            {"n_a", s.n_a()},
            {"tx", s.partition.tx},
            {"rx", s.partition.rx},
            {"snr_db", db_to_j(s.snr_db)},
            {"ota_knowledge_error_db", db_to_j(s.ota_knowledge_error_db)},
            {"seed", s.seed},
            {"hw", hw_to_j(s.hw)},
            {"s_ota", to_j(s.s_ota.entries())},
            {"s_dut_true", to_j(s.s_dut_true.entries())}};
}

// Reading -------------------------------------------------------------------------

const json& field(const json& obj, const char* key) {
    if (!obj.is_object()) throw SchemaError(std::string("expected an object holding '") + key + "'");
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(std::string("missing field '") + key + "'");
    return *it;
}

double number(const json& j, const std::string& what) {
    if (!j.is_number()) throw SchemaError("field '" + what + "' must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw SchemaError("field '" + what + "' is not finite");
    return v;
}

int integer(const json& j, const std::string& what) {
    if (!j.is_number_integer()) throw SchemaError("field '" + what + "' must be an integer");
    return j.get<int>();
}

std::uint64_t unsigned_integer(const json& j, const std::string& what) {
    if (!j.is_number_unsigned()) throw SchemaError("field '" + what + "' must be a non-negative integer");
    return j.get<std::uint64_t>();
}

double db_from_j(const json& j, const std::string& what) {
    if (j.is_null()) return kNoiseless;
    return number(j, what);
}

complex complex_from_j(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2) throw SchemaError("'" + what + "' must be a [re, im] pair");
    return {number(j[0], what), number(j[1], what)};
}

CMatrix matrix_from_j(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        throw SchemaError("'" + what + "' must have " + std::to_string(rows) + " rows");
    }
    CMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw SchemaError("'" + what + "' row " + std::to_string(i) + " must have " + std::to_string(cols) +
                              " entries");
        }
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = complex_from_j(row[static_cast<std::size_t>(c)], what);
    }
    return m;
}

IndexSet index_set_from_j(const json& j, const std::string& what) {
    if (!j.is_array()) throw SchemaError("'" + what + "' must be an array of port indices");
    IndexSet out;
    for (const auto& v : j) out.push_back(integer(v, what));
    return out;
}

void check_header(const json& doc, const char* kind) {
    const json& version = field(doc, "schema_version");
    if (!version.is_number_integer() || version.get<int>() != kSchemaVersion) {
        throw SchemaError("unsupported schema_version " + version.dump() + " (expected " +
                          std::to_string(kSchemaVersion) + ")");
    }
    const json& k = field(doc, "kind");
    if (!k.is_string() || k.get<std::string>() != kind) {
        throw SchemaError(std::string("document kind must be '") + kind + "'");
    }
}

json parse_json(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        // e.byte is 1-based and points just past the offending character.
        const std::size_t at = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
        const auto before = text.substr(0, at);
        const std::size_t line = 1 + static_cast<std::size_t>(std::count(before.begin(), before.end(), '\n'));
        const auto nl = before.rfind('\n');
        const std::size_t column = nl == std::string_view::npos ? at + 1 : at - nl;
        throw ParseError(std::string("malformed document: ") + e.what(), line, column);
    }
}

TLNHardwareModel hw_from_j(const json& j) {
    TLNHardwareModel hw;
    hw.gamma_a = complex_from_j(field(j, "gamma_a"), "gamma_a");
    hw.gamma_b = complex_from_j(field(j, "gamma_b"), "gamma_b");
    hw.gamma_c = complex_from_j(field(j, "gamma_c"), "gamma_c");
    hw.thru_s21 = complex_from_j(field(j, "thru_s21"), "thru_s21");
    hw.thru_s11 = complex_from_j(field(j, "thru_s11"), "thru_s11");
    hw.thru_s22 = complex_from_j(field(j, "thru_s22"), "thru_s22");
    hw.coupled_s21 = complex_from_j(field(j, "coupled_s21"), "coupled_s21");
    hw.coupled_s11 = complex_from_j(field(j, "coupled_s11"), "coupled_s11");
    hw.idle_dut_reflection = complex_from_j(field(j, "idle_dut_reflection"), "idle_dut_reflection");
    return hw;
}

Scenario scenario_from_j(const json& j) {
    check_header(j, "scenario");
    const int n_s = integer(field(j, "n_s"), "n_s");
    const int n_a = integer(field(j, "n_a"), "n_a");
    if (n_s < 1 || n_a < 1) throw SchemaError("n_s and n_a must be positive");
    Scenario s;
    try {
        s.partition = PortPartition::standard(n_a, n_s, index_set_from_j(field(j, "tx"), "tx"),
                                              index_set_from_j(field(j, "rx"), "rx"));
    } catch (const InvalidArgument& e) {
        throw SchemaError(std::string("invalid port partition: ") + e.what());
    }
    s.snr_db = db_from_j(field(j, "snr_db"), "snr_db");
    s.ota_knowledge_error_db = db_from_j(field(j, "ota_knowledge_error_db"), "ota_knowledge_error_db");
    s.seed = unsigned_integer(field(j, "seed"), "seed");
    s.hw = hw_from_j(field(j, "hw"));
    s.s_ota = ScatteringMatrix(matrix_from_j(field(j, "s_ota"), n_a + n_s, n_a + n_s, "s_ota"),
                               {{"A", s.partition.accessible}, {"C", s.partition.nda_side}});
    s.s_dut_true = ScatteringMatrix(matrix_from_j(field(j, "s_dut_true"), n_s, n_s, "s_dut_true"));
    try {
        s.validate();
    } catch (const Error& e) {
        throw SchemaError(std::string("invalid scenario: ") + e.what());
    }
    return s;
}

} // namespace

// Scenario ------------------------------------------------------------------------

std::string scenario_to_json(const Scenario& scenario) { return scenario_to_j(scenario).dump(1); }

Scenario scenario_from_json(std::string_view text) { return scenario_from_j(parse_json(text)); }

void save_scenario(const std::filesystem::path& path, const Scenario& scenario) {
    write_text_file(path, scenario_to_json(scenario));
}

Scenario load_scenario(const std::filesystem::path& path) { return scenario_from_json(read_text_file(path)); }

// Campaign ------------------------------------------------------------------------

std::string campaign_to_json(const MeasurementCampaign& c, const Scenario* scenario) {
    c.validate();
    json configs = json::array();
    json h = json::array();
    json pf = json::array();
    for (int r = 0; r < c.p(); ++r) {
        const auto i = static_cast<std::size_t>(r);
        configs.push_back(c.configs[i].token());
        h.push_back(to_j(c.h_meas[i]));
        const auto& blk = c.pf_known[i];
        pf.push_back({{"config_id", blk.config_id},
                      {"s_aa", to_j(blk.s_aa)},
                      {"s_as", to_j(blk.s_as)},
                      {"s_sa", to_j(blk.s_sa)},
                      {"s_ss", to_j(blk.s_ss)}});
    }
    json doc = {{"schema_version", kSchemaVersion},
                {"kind", "campaign"},
                {"n_s", c.n_s},
                {"n_a", c.n_a},
                {"tx", c.tx},
                {"rx", c.rx},
                {"snr_db", db_to_j(c.snr_db)},
                {"configs", std::move(configs)},
                {"h_meas", std::move(h)},
                {"pf_known", std::move(pf)}};
    if (c.noise_variance) doc["noise_variance"] = finite(*c.noise_variance, "noise_variance");
    if (scenario) doc["scenario"] = scenario_to_j(*scenario);
    return doc.dump(1);
}

CampaignFile campaign_from_json(std::string_view text) {
    const json doc = parse_json(text);
    check_header(doc, "campaign");
    CampaignFile out;
    auto& c = out.campaign;
    c.n_s = integer(field(doc, "n_s"), "n_s");
    c.n_a = integer(field(doc, "n_a"), "n_a");
    if (c.n_s < 1 || c.n_a < 1) throw SchemaError("n_s and n_a must be positive");
    c.tx = index_set_from_j(field(doc, "tx"), "tx");
    c.rx = index_set_from_j(field(doc, "rx"), "rx");
    c.snr_db = db_from_j(field(doc, "snr_db"), "snr_db");
    if (auto it = doc.find("noise_variance"); it != doc.end()) c.noise_variance = number(*it, "noise_variance");

    const json& configs = field(doc, "configs");
    const json& h = field(doc, "h_meas");
    const json& pf = field(doc, "pf_known");
    if (!configs.is_array() || !h.is_array() || !pf.is_array()) {
        throw SchemaError("configs, h_meas and pf_known must be arrays");
    }
    if (h.size() != configs.size() || pf.size() != configs.size()) {
        throw SchemaError("configs, h_meas and pf_known must have equal length");
    }
    const auto n_t = static_cast<Eigen::Index>(c.tx.size());
    const auto n_r = static_cast<Eigen::Index>(c.rx.size());
    for (std::size_t r = 0; r < configs.size(); ++r) {
        if (!configs[r].is_string()) throw SchemaError("configuration tokens must be strings");
        try {
            c.configs.push_back(TLNConfiguration::from_token(configs[r].get<std::string>()));
        } catch (const InvalidArgument& e) {
            throw SchemaError("configuration " + std::to_string(r) + ": " + e.what());
        }
        const std::string tag = "[" + std::to_string(r) + "]";
        c.h_meas.push_back(matrix_from_j(h[r], n_r, n_t, "h_meas" + tag));
        const json& blk = pf[r];
        PFRealization real;
        const json& id = field(blk, "config_id");
        if (!id.is_string()) throw SchemaError("config_id must be a string");
        real.config_id = id.get<std::string>();
        real.s_aa = matrix_from_j(field(blk, "s_aa"), c.n_a, c.n_a, "pf_known" + tag + ".s_aa");
        real.s_as = matrix_from_j(field(blk, "s_as"), c.n_a, c.n_s, "pf_known" + tag + ".s_as");
        real.s_sa = matrix_from_j(field(blk, "s_sa"), c.n_s, c.n_a, "pf_known" + tag + ".s_sa");
        real.s_ss = matrix_from_j(field(blk, "s_ss"), c.n_s, c.n_s, "pf_known" + tag + ".s_ss");
        c.pf_known.push_back(std::move(real));
    }
    try {
        c.validate();
    } catch (const Error& e) {
        throw SchemaError(std::string("invalid campaign: ") + e.what());
    }
    if (auto it = doc.find("scenario"); it != doc.end()) out.scenario = scenario_from_j(*it);
    return out;
}

void save_campaign(const std::filesystem::path& path, const MeasurementCampaign& campaign, const Scenario* scenario) {
    write_text_file(path, campaign_to_json(campaign, scenario));
}

CampaignFile load_campaign(const std::filesystem::path& path) { return campaign_from_json(read_text_file(path)); }

// Report ------------------------------------------------------------------------

std::string report_to_json(const EstimateReport& report, const std::optional<MseResult>& error) {
    json losses = json::array();
    for (double l : report.restart_losses) losses.push_back(std::isfinite(l) ? json(l) : json(nullptr));
    json doc = {{"schema_version", kSchemaVersion},
                {"kind", "report"},
                {"n_s", report.s_dut_hat.n_ports()},
                {"theta_hat", to_j(report.theta_hat)},
                {"s_dut_hat", to_j(report.s_dut_hat.entries())},
                {"final_loss", finite(report.final_loss, "final_loss")},
                {"restart_losses", std::move(losses)},
                {"best_restart", report.best_restart},
                {"iterations", report.loss_trace.size()},
                {"converged", report.converged},
                {"warnings", report.warnings}};
    if (error) doc["mse"] = {{"raw", finite(error->raw, "mse")}, {"normalized", finite(error->normalized, "mse")}};
    return doc.dump(1);
}

void save_report(const std::filesystem::path& path, const EstimateReport& report,
                 const std::optional<MseResult>& error) {
    write_text_file(path, report_to_json(report, error));
}

EstimateReport load_report(const std::filesystem::path& path) {
    const json doc = parse_json(read_text_file(path));
    check_header(doc, "report");
    EstimateReport r;
    const json& theta = field(doc, "theta_hat");
    if (!theta.is_array()) throw SchemaError("theta_hat must be an array");
    r.theta_hat.resize(static_cast<Eigen::Index>(theta.size()));
    for (std::size_t k = 0; k < theta.size(); ++k) {
        r.theta_hat(static_cast<Eigen::Index>(k)) = complex_from_j(theta[k], "theta_hat");
    }
    try {
        r.s_dut_hat = sym(r.theta_hat);
    } catch (const InvalidArgument& e) {
        throw SchemaError(e.what());
    }
    r.final_loss = number(field(doc, "final_loss"), "final_loss");
    for (const auto& l : field(doc, "restart_losses")) {
        r.restart_losses.push_back(l.is_null() ? std::numeric_limits<double>::infinity() : number(l, "restart_losses"));
    }
    r.best_restart = integer(field(doc, "best_restart"), "best_restart");
    const json& conv = field(doc, "converged");
    if (!conv.is_boolean()) throw SchemaError("converged must be a boolean");
    r.converged = conv.get<bool>();
    for (const auto& w : field(doc, "warnings")) {
        if (!w.is_string()) throw SchemaError("warnings must be strings");
        r.warnings.push_back(w.get<std::string>());
    }
    return r;
}

// CSV -----------------------------------------------------------------------------

std::string sweep_csv(const SweepResult& result) {
    std::string out(kSweepCsvHeader);
    out += '\n';
    for (const auto& r : result.rows) {
        out += std::to_string(r.n_a) + ',' + std::to_string(r.n_t) + ',' + std::to_string(r.n_r) + ',' +
               std::to_string(r.m) + ',' + std::to_string(r.p) + ',' + r.tx_rx + ',' + format_double(r.effective_rank) +
               ',' + format_double(r.mse) + ',' + format_double(r.mse_normalized) + ',' + std::to_string(r.seed) + '\n';
    }
    return out;
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
    std::string out(kAggregateCsvHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += std::to_string(r.m) + ',' + std::to_string(r.p) + ',' + r.stat + ',' + format_double(r.effective_rank) +
               ',' + format_double(r.mse) + '\n';
    }
    return out;
}

std::string loss_trace_csv(const std::vector<double>& trace) {
    std::string out(kLossTraceCsvHeader);
    out += '\n';
    for (std::size_t i = 0; i < trace.size(); ++i) out += std::to_string(i) + ',' + format_double(trace[i]) + '\n';
    return out;
}

std::string rank_csv(const RankReport& report) {
    std::string out(kRankCsvHeader);
    out += '\n';
    out += std::to_string(report.m) + ',' + std::to_string(report.p) + ',' + std::to_string(report.d) + ',' +
           report.tx_rx_label + ',' + format_double(report.effective_rank) + ',';
    for (std::size_t k = 0; k < report.singular_values.size(); ++k) {
        if (k) out += ' ';
        out += format_double(report.singular_values[k]);
    }
    out += '\n';
    return out;
}

// Files ---------------------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

} // namespace mxd
