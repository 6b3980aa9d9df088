#include <set>
#include <sstream>

#include <json.hpp>

#include "vpreg/io.hpp"

namespace vpreg {
namespace {
using nlohmann::json;

std::string cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

json composition_json(const CompositionError& e) {
  return {{"max_det", e.max_det},   {"sum_det", e.sum_det},   {"sum_det_per_voxel", e.sum_det_per_voxel},
          {"max_norm", e.max_norm}, {"sum_norm", e.sum_norm}, {"sum_norm_per_voxel", e.sum_norm_per_voxel}};
}

CompositionError composition_from(const json& j) {
  CompositionError e;
  e.max_det = j.at("max_det").get<double>();
  e.sum_det = j.at("sum_det").get<double>();
  e.sum_det_per_voxel = j.at("sum_det_per_voxel").get<double>();
  e.max_norm = j.at("max_norm").get<double>();
  e.sum_norm = j.at("sum_norm").get<double>();
  e.sum_norm_per_voxel = j.at("sum_norm_per_voxel").get<double>();
  return e;
}

std::vector<std::int32_t> all_labels(const std::vector<MetricRecord>& records) {
  std::set<std::int32_t> s;
  for (const auto& r : records)
    for (const auto& [l, v] : r.dice) s.insert(l);
  return {s.begin(), s.end()};
}

const std::vector<std::string> kStatNames = {"min", "q25", "median", "q75", "max", "mean", "std", "count"};

std::vector<double> stat_values(const SummaryStats& s) {
  return {s.min, s.q25, s.median, s.q75, s.max, s.mean, s.std, static_cast<double>(s.count)};
}

}  // namespace

std::vector<std::string> record_header(const std::vector<MetricRecord>& records) {
  std::vector<std::string> names;
  for (const auto& [name, v] : MetricRecord{}.columns()) names.push_back(name);
  for (auto l : all_labels(records)) names.push_back("dice_" + std::to_string(l));
  return names;
}

std::string records_csv(const std::vector<MetricRecord>& records, const std::vector<std::string>& ids) {
  if (!ids.empty() && ids.size() != records.size())
    throw Error(ErrorCode::InvalidArgument, "one id per record is required");
  std::ostringstream out;
  const auto labels = all_labels(records);
  const auto header = record_header(records);
  if (!ids.empty()) out << "id,";
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << "\n";
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (!ids.empty()) out << ids[r] << ",";
    bool first = true;
    for (const auto& [name, v] : records[r].columns()) {
      out << (first ? "" : ",") << cell(v);
      first = false;
    }
    for (auto l : labels) {
      std::optional<double> v;
      for (const auto& [label, d] : records[r].dice)
        if (label == l) v = d;
      out << "," << cell(v);
    }
    out << "\n";
  }
  return out.str();
}

std::string record_json(const MetricRecord& r) {
  json j;
  j["mse_ratio"] = opt(r.mse_ratio);
  j["mi_incr"] = opt(r.mi_incr);
  j["mi_incr_pct"] = opt(r.mi_incr ? std::optional<double>(*r.mi_incr * 100.0) : std::nullopt);
  j["jd_min"] = r.jd_min;
  j["jd_max"] = r.jd_max;
  j["jd_neg_fraction"] = r.jd_neg_fraction;
  if (r.inverse) {
    j["inverse"] = {{"inv_after_fwd", composition_json(r.inverse->inv_after_fwd)},
                    {"fwd_after_inv", composition_json(r.inverse->fwd_after_inv)}};
  } else {
    j["inverse"] = nullptr;
  }
  j["dice"] = json::array();
  for (const auto& [l, v] : r.dice) j["dice"].push_back({{"label", l}, {"value", v}});
  j["dice_mean"] = opt(r.dice_mean());
  return j.dump(2) + "\n";
}

MetricRecord record_from_json(const std::string& text) {
  MetricRecord r;
  try {
    const json j = json::parse(text);
    r.mse_ratio = opt_from(j, "mse_ratio");
    r.mi_incr = opt_from(j, "mi_incr");
    r.jd_min = j.at("jd_min").get<double>();
    r.jd_max = j.at("jd_max").get<double>();
    r.jd_neg_fraction = j.at("jd_neg_fraction").get<double>();
    if (j.contains("inverse") && !j["inverse"].is_null()) {
      r.inverse = InverseConsistency{composition_from(j["inverse"].at("inv_after_fwd")),
                                     composition_from(j["inverse"].at("fwd_after_inv"))};
    }
    for (const auto& d : j.at("dice")) r.dice.emplace_back(d.at("label").get<std::int32_t>(), d.at("value").get<double>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed metric record: ") + e.what());
  }
  return r;
}

std::string summary_csv(const CohortSummary& s) {
  std::ostringstream out;
  out << "metric";
  for (const auto& n : kStatNames) out << "," << n;
  out << "\n";
  for (const auto& [name, st] : s.metrics) {
    out << name;
    for (double v : stat_values(st)) out << "," << format_number(v);
    out << "\n";
  }
  return out.str();
}

std::string summary_json(const CohortSummary& s) {
  json j = json::array();
  for (const auto& [name, st] : s.metrics) {
    json row = {{"metric", name}};
    const auto v = stat_values(st);
    for (std::size_t k = 0; k + 1 < kStatNames.size(); ++k) row[kStatNames[k]] = v[k];
    row["count"] = st.count;
    j.push_back(row);
  }
  return j.dump(2) + "\n";
}

std::string trace_csv(const std::vector<RegTraceEntry>& trace) {
  std::ostringstream out;
  out << "stage,iter,mse,step,min_jd,solves,accepted\n";
  for (const auto& e : trace) {
    out << e.stage << "," << e.iter << "," << format_number(e.mse) << "," << format_number(e.step) << ","
        << format_number(e.min_jd) << "," << e.solves << "," << (e.accepted ? 1 : 0) << "\n";
  }
  return out.str();
}

void write_report(const MetricRecord& record, const std::string& path, ReportFormat format) {
  write_text(path, format == ReportFormat::Csv ? records_csv({record}) : record_json(record));
}

void write_report(const std::vector<MetricRecord>& records, const std::string& path, ReportFormat format) {
  const CohortSummary s = cohort_summary(records);
  write_text(path, format == ReportFormat::Csv ? summary_csv(s) : summary_json(s));
}

}  // namespace vpreg
