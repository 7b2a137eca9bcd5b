#pragma once

// File formats. Column orders are frozen:
//   records.csv          id,seed,env,accident,l,w
//   critical_log.csv     record_id,moment,p,q_alpha,q_1..q_J,step,lane_change
//   convergence_<m>.csv  n,mu,rhw            (rhw empty while undefined)
//   adjusted_points.csv  id,l,unadjusted,adjusted
//   replications.csv     replication,seed,nde_tests,nade_tests,atscv_tests,
//                        nde_over_nade,nade_over_atscv,mu_nde,mu_nade,mu_atscv
// Reals are written in the shortest form that reads back to the same double.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "atscv/harness.hpp"

namespace atscv {

inline constexpr int kSummaryVersion = 1;

std::string format_double(double value);
double parse_double(std::string_view text);

void write_records_csv(const std::filesystem::path& path, std::span<const TestRecord> records);
void write_critical_log_csv(const std::filesystem::path& path,
                            std::span<const TestRecord> records, std::size_t num_surrogates);
void write_convergence_csv(const std::filesystem::path& path,
                           std::span<const ConvergencePoint> series);
void write_adjusted_points_csv(const std::filesystem::path& path,
                               std::span<const AdjustedPoint> points);

/// Reads records.csv and its critical_log.csv sidecar from `dir`.
std::vector<TestRecord> read_records(const std::filesystem::path& dir);

nlohmann::json estimates_json(const CampaignResult& result);
nlohmann::json summary_json(const CampaignResult& result, const CampaignConfig& cfg,
                            const std::vector<std::string>& files);
nlohmann::json oracle_json(const OracleResult& oracle);

/// Throws Error describing the first structural problem.
void validate_summary(const nlohmann::json& summary);

/// Writes every campaign output into `dir` and returns the file names.
std::vector<std::string> emit_outputs(const CampaignResult& result, const CampaignConfig& cfg,
                                      const std::filesystem::path& dir);

void write_replications_csv(const std::filesystem::path& path, const ReplicationStudy& study);
nlohmann::json replication_json(const ReplicationStudy& study, const CampaignConfig& cfg);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace atscv
