#include "atscv/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "atscv/errors.hpp"

namespace atscv {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw IoError("malformed number '" + std::string(text) + "'");
  return value;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

std::uint64_t parse_u64(std::string_view text) {
  std::uint64_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw IoError("malformed integer '" + std::string(text) + "'");
  return value;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

template <typename T>
std::string opt_cell(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_floating_point_v<T>) return format_double(*v);
  else return std::to_string(*v);
}

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

void write_records_csv(const fs::path& path, std::span<const TestRecord> records) {
  auto out = open_out(path);
  out << "id,seed,env,accident,l,w\n";
  for (const auto& r : records)
    out << r.id << ',' << r.seed << ',' << to_string(r.env) << ',' << r.accident << ','
        << r.control_steps() << ',' << format_double(r.weight) << '\n';
  close_out(out, path);
}

void write_critical_log_csv(const fs::path& path, std::span<const TestRecord> records,
                            std::size_t num_surrogates) {
  auto out = open_out(path);
  out << "record_id,moment,p,q_alpha";
  for (std::size_t j = 1; j <= num_surrogates; ++j) out << ",q_" << j;
  out << ",step,lane_change\n";
  for (const auto& r : records) {
    for (std::size_t k = 0; k < r.log.size(); ++k) {
      const auto& m = r.log[k];
      if (m.q.size() != num_surrogates)
        throw IoError("record " + std::to_string(r.id) + " logs " + std::to_string(m.q.size()) +
                      " surrogate densities, expected " + std::to_string(num_surrogates));
      out << r.id << ',' << k << ',' << format_double(m.p) << ',' << format_double(m.q_alpha);
      for (double q : m.q) out << ',' << format_double(q);
      out << ',' << m.step << ',' << (m.lane_change ? 1 : 0) << '\n';
    }
  }
  close_out(out, path);
}

void write_convergence_csv(const fs::path& path, std::span<const ConvergencePoint> series) {
  auto out = open_out(path);
  out << "n,mu,rhw\n";
  for (const auto& p : series)
    out << p.n << ',' << format_double(p.mu) << ',' << opt_cell(p.rhw) << '\n';
  close_out(out, path);
}

void write_adjusted_points_csv(const fs::path& path, std::span<const AdjustedPoint> points) {
  auto out = open_out(path);
  out << "id,l,unadjusted,adjusted\n";
  for (const auto& p : points)
    out << p.id << ',' << p.control_steps << ',' << format_double(p.unadjusted) << ','
        << format_double(p.adjusted) << '\n';
  close_out(out, path);
}

std::vector<TestRecord> read_records(const fs::path& dir) {
  const fs::path records_path = dir / "records.csv";
  const fs::path log_path = dir / "critical_log.csv";
  std::ifstream in(records_path);
  if (!in) throw IoError("cannot read " + records_path.string());

  std::string line;
  if (!std::getline(in, line) || line != "id,seed,env,accident,l,w")
    throw IoError(records_path.string() + ": unexpected header");
  std::vector<TestRecord> records;
  std::map<std::uint64_t, std::size_t> index;
  std::vector<int> expected_l;
  for (std::size_t row = 2; std::getline(in, line); ++row) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != 6)
      throw IoError(records_path.string() + ":" + std::to_string(row) + ": expected 6 columns");
    TestRecord r;
    r.id = parse_u64(cells[0]);
    r.seed = parse_u64(cells[1]);
    r.env = parse_environment(cells[2]);
    r.accident = static_cast<int>(parse_u64(cells[3]));
    expected_l.push_back(static_cast<int>(parse_u64(cells[4])));
    r.weight = parse_double(cells[5]);
    index[r.id] = records.size();
    records.push_back(std::move(r));
  }

  std::ifstream log(log_path);
  if (!log) throw IoError("cannot read " + log_path.string());
  if (!std::getline(log, line)) throw IoError(log_path.string() + ": missing header");
  const auto header = split(line);
  if (header.size() < 6 || header[0] != "record_id")
    throw IoError(log_path.string() + ": unexpected header");
  const std::size_t num_q = header.size() - 6;
  for (std::size_t row = 2; std::getline(log, line); ++row) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw IoError(log_path.string() + ":" + std::to_string(row) + ": wrong column count");
    const auto it = index.find(parse_u64(cells[0]));
    if (it == index.end())
      throw IoError(log_path.string() + ":" + std::to_string(row) + ": unknown record id");
    CriticalMoment m;
    m.p = parse_double(cells[2]);
    m.q_alpha = parse_double(cells[3]);
    for (std::size_t j = 0; j < num_q; ++j) m.q.push_back(parse_double(cells[4 + j]));
    m.step = static_cast<int>(parse_u64(cells[4 + num_q]));
    m.lane_change = parse_u64(cells[5 + num_q]) != 0;
    records[it->second].log.push_back(std::move(m));
  }
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].control_steps() != expected_l[i])
      throw IoError("record " + std::to_string(records[i].id) + ": l does not match its log");
  return records;
}

nlohmann::json estimates_json(const CampaignResult& result) {
  json estimates = json::object();
  for (const auto& m : result.methods) {
    json groups = json::array();
    for (const auto& g : m.estimate.groups)
      groups.push_back({{"l", g.control_steps},
                        {"overflow", g.overflow},
                        {"adjusted", g.adjusted},
                        {"count", g.count},
                        {"regressors", g.regressors},
                        {"mu", g.mu},
                        {"variance", g.variance},
                        {"y_variance", g.y_variance},
                        {"adjusted_variance", g.adjusted_variance}});
    estimates[to_string(m.method)] = {{"mu", m.estimate.mu},
                                      {"variance", m.estimate.variance},
                                      {"n", m.estimate.n},
                                      {"rhw", opt_json(m.rhw)},
                                      {"tests_to_threshold", opt_json(m.tests_to_threshold)},
                                      {"groups", groups}};
  }
  return estimates;
}

nlohmann::json oracle_json(const OracleResult& oracle) {
  return {{"mu", oracle.mu},
          {"bins", oracle.bins},
          {"leaves", oracle.leaves},
          {"no_cut_in_max_steps_mass", oracle.no_cut_in_max_steps_mass},
          {"open_after_cut_in_mass", oracle.open_after_cut_in_mass}};
}

nlohmann::json summary_json(const CampaignResult& result, const CampaignConfig& cfg,
                            const std::vector<std::string>& files) {
  json accel = {{"nde_over_nade", nullptr}, {"nade_over_atscv", opt_json(result.nade_over_atscv)}};
  json oracle = nullptr;
  if (result.oracle) {
    oracle = oracle_json(*result.oracle);
    json checks = json::object();
    for (const auto& c : result.oracle_checks)
      checks[to_string(c.method)] = {{"std_errors", c.std_errors}, {"within_3se", c.within_3se}};
    oracle["checks"] = checks;
  }
  return {{"version", kSummaryVersion},
          {"env", to_string(result.env)},
          {"seed", result.seed},
          {"episodes", result.records.size()},
          {"num_surrogates", result.num_surrogates},
          {"estimator",
           {{"gamma", cfg.estimator.gamma},
            {"rhw_threshold", cfg.estimator.rhw_threshold},
            {"max_control_steps", cfg.estimator.max_control_steps},
            {"confirmation_window", cfg.estimator.confirmation_window},
            {"epsilon", cfg.sim.epsilon}}},
          {"estimates", estimates_json(result)},
          {"acceleration_factors", accel},
          {"oracle", oracle},
          {"files", files}};
}

void validate_summary(const nlohmann::json& s) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error("summary.json: " + what);
  };
  auto number_or_null = [](const json& v) { return v.is_null() || v.is_number(); };

  require(s.is_object(), "top level must be an object");
  for (const char* key : {"version", "env", "seed", "episodes", "num_surrogates", "estimator",
                          "estimates", "acceleration_factors", "oracle", "files"})
    require(s.contains(key), std::string("missing '") + key + "'");
  require(s["version"] == kSummaryVersion, "unsupported version");
  require(s["env"] == "nde" || s["env"] == "nade", "env must be nde or nade");
  require(s["seed"].is_number_unsigned(), "seed must be an unsigned integer");
  require(s["episodes"].is_number_unsigned(), "episodes must be an unsigned integer");
  require(s["estimates"].is_object(), "estimates must be an object");
  for (const auto& [name, e] : s["estimates"].items()) {
    require(name == "nde" || name == "nade" || name == "atscv", "unknown method " + name);
    for (const char* key : {"mu", "variance", "n"})
      require(e.contains(key) && e[key].is_number(), name + "." + key + " must be a number");
    require(e.contains("rhw") && number_or_null(e["rhw"]), name + ".rhw");
    require(e.contains("tests_to_threshold") && number_or_null(e["tests_to_threshold"]),
            name + ".tests_to_threshold");
    require(e.contains("groups") && e["groups"].is_array(), name + ".groups must be an array");
    for (const auto& g : e["groups"])
      for (const char* key : {"l", "count", "mu", "variance"})
        require(g.contains(key) && g[key].is_number(), name + ".groups[]." + key);
  }
  const auto& accel = s["acceleration_factors"];
  require(accel.is_object() && accel.contains("nde_over_nade") &&
              accel.contains("nade_over_atscv") && number_or_null(accel["nde_over_nade"]) &&
              number_or_null(accel["nade_over_atscv"]),
          "acceleration_factors");
  require(s["oracle"].is_null() || (s["oracle"].is_object() && s["oracle"]["mu"].is_number()),
          "oracle must be null or carry mu");
  require(s["files"].is_array(), "files must be an array");
  for (const auto& f : s["files"]) require(f.is_string(), "files must hold names");
}

std::vector<std::string> emit_outputs(const CampaignResult& result, const CampaignConfig& cfg,
                                      const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::vector<std::string> files{"records.csv", "critical_log.csv"};
  write_records_csv(dir / files[0], result.records);
  write_critical_log_csv(dir / files[1], result.records, result.num_surrogates);
  for (const auto& m : result.methods) {
    files.push_back(std::string("convergence_") + to_string(m.method) + ".csv");
    write_convergence_csv(dir / files.back(), m.convergence);
  }
  files.push_back("adjusted_points.csv");
  write_adjusted_points_csv(dir / files.back(), result.adjusted);
  files.push_back("summary.json");

  const json summary = summary_json(result, cfg, files);
  validate_summary(summary);
  write_json(dir / "summary.json", summary);
  return files;
}

void write_replications_csv(const fs::path& path, const ReplicationStudy& study) {
  auto out = open_out(path);
  out << "replication,seed,nde_tests,nade_tests,atscv_tests,nde_over_nade,nade_over_atscv,"
         "mu_nde,mu_nade,mu_atscv\n";
  for (const auto& r : study.rows)
    out << r.index << ',' << r.seed << ',' << opt_cell(r.nde) << ',' << opt_cell(r.nade) << ','
        << opt_cell(r.atscv) << ',' << opt_cell(acceleration_factor(r.nde, r.nade)) << ','
        << opt_cell(acceleration_factor(r.nade, r.atscv)) << ',' << opt_cell(r.mu_nde) << ','
        << format_double(r.mu_nade) << ',' << format_double(r.mu_atscv) << '\n';
  close_out(out, path);
}

nlohmann::json replication_json(const ReplicationStudy& study, const CampaignConfig& cfg) {
  auto stats = [](const std::optional<FactorStats>& s) -> json {
    if (!s) return nullptr;
    return {{"count", s->count}, {"median", s->median}, {"mean", s->mean}, {"sd", s->sd}};
  };
  return {{"version", kSummaryVersion},
          {"seed", cfg.seed},
          {"replications", study.rows.size()},
          {"episodes", cfg.episodes},
          {"nde_episodes", cfg.replicate_nde ? json(cfg.nde_episodes) : json(nullptr)},
          {"rhw_threshold", cfg.estimator.rhw_threshold},
          {"gamma", cfg.estimator.gamma},
          {"acceleration_factors",
           {{"nde_over_nade", stats(study.nde_over_nade)},
            {"nade_over_atscv", stats(study.nade_over_atscv)}}},
          {"atscv_fewer_tests", study.atscv_fewer}};
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  close_out(out, path);
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace atscv
