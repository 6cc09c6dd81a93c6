#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "mxd/diagnostics.hpp"

namespace mxd {

/// Current version of the scenario, campaign and report documents.
inline constexpr int kSchemaVersion = 1;

// Scenario files (.scenario.json) -----------------------------------------------

std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(std::string_view text);
void save_scenario(const std::filesystem::path& path, const Scenario& scenario);
Scenario load_scenario(const std::filesystem::path& path);

// Campaign files (.campaign.json) -----------------------------------------------

/// A campaign file is self-contained: it carries pf_known, so estimation does
/// not need the fixture, and optionally the ground-truth scenario.
struct CampaignFile {
    MeasurementCampaign campaign;
    std::optional<Scenario> scenario;
};

std::string campaign_to_json(const MeasurementCampaign& campaign, const Scenario* scenario = nullptr);
CampaignFile campaign_from_json(std::string_view text);
void save_campaign(const std::filesystem::path& path, const MeasurementCampaign& campaign,
                   const Scenario* scenario = nullptr);
CampaignFile load_campaign(const std::filesystem::path& path);

// Estimate reports (.report) ------------------------------------------------------

std::string report_to_json(const EstimateReport& report, const std::optional<MseResult>& error = std::nullopt);
void save_report(const std::filesystem::path& path, const EstimateReport& report,
                 const std::optional<MseResult>& error = std::nullopt);
/// Reads back theta_hat, losses and flags (the loss trace lives in its CSV).
EstimateReport load_report(const std::filesystem::path& path);

// CSV -----------------------------------------------------------------------------

inline constexpr std::string_view kSweepCsvHeader =
    "n_a,n_t,n_r,m,p,tx_rx,effective_rank,mse,mse_normalized,seed";
inline constexpr std::string_view kAggregateCsvHeader = "m,p,stat,effective_rank,mse";
inline constexpr std::string_view kLossTraceCsvHeader = "iteration,loss";
inline constexpr std::string_view kRankCsvHeader = "m,p,d,tx_rx,effective_rank,singular_values";

std::string sweep_csv(const SweepResult& result);
std::string aggregate_csv(const std::vector<AggregateRow>& rows);
std::string loss_trace_csv(const std::vector<double>& trace);
std::string rank_csv(const RankReport& report);

// Files -------------------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

} // namespace mxd
