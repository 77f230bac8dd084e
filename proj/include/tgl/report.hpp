#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgl/error.hpp"
#include "tgl/trainer.hpp"

namespace tgl {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kReportSchemaName = "tgl-report";

/// One report file: dataset description plus one run per rank.
struct ReportDocument {
  nlohmann::json dataset = nlohmann::json::object();
  /// Settings left at their built-in defaults rather than chosen by the caller.
  std::vector<std::string> defaulted_settings;
  std::vector<TrainReport> runs;

  friend bool operator==(const ReportDocument&, const ReportDocument&) = default;
};

namespace detail {

template <typename Enum, typename Parse>
Enum enum_field(const nlohmann::json& j, const char* key, Parse parse) {
  const auto text = j.at(key).get<std::string>();
  auto v = parse(text);
  if (!v) throw ParseError(std::string("unknown value '") + text + "' for '" + key + "'");
  return *v;
}

/// Pretty printer that keeps arrays of scalars on one line, so the epoch
/// table reads one row per line.
inline void dump_rows(std::ostream& out, const nlohmann::json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  const std::string inner(static_cast<std::size_t>(indent + 2), ' ');
  auto scalar_array = [](const nlohmann::json& a) {
    for (const auto& e : a) {
      if (e.is_structured()) return false;
    }
    return true;
  };
  if (j.is_object() && !j.empty()) {
    out << "{\n";
    std::size_t i = 0;
    for (auto it = j.begin(); it != j.end(); ++it, ++i) {
      out << inner << nlohmann::json(it.key()).dump() << ": ";
      dump_rows(out, it.value(), indent + 2);
      out << (i + 1 < j.size() ? ",\n" : "\n");
    }
    out << pad << '}';
  } else if (j.is_array() && !j.empty() && !scalar_array(j)) {
    out << "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      out << inner;
      dump_rows(out, j[i], indent + 2);
      out << (i + 1 < j.size() ? ",\n" : "\n");
    }
    out << pad << ']';
  } else {
    out << j.dump();
  }
}

}  // namespace detail

inline nlohmann::json config_to_json(const TrainConfig& c) {
  return {
      {"method", to_string(c.method)},
      {"rank", c.rank},
      {"knn_k", c.knn_k},
      {"layer_dims", c.resolved_layer_dims()},
      {"activation", to_string(c.activation)},
      {"final_activation", to_string(c.final_activation)},
      {"optimizer", to_string(c.optimizer)},
      {"learning_rate", c.learning_rate},
      {"max_epochs", c.max_epochs},
      {"patience", c.patience},
      {"graph_rebuild_period", c.graph_rebuild_period},
      {"seed", c.seed},
      {"split", c.split},
      {"weighted_edges", c.weighted_edges},
      {"factor_init_scale", c.factor_init_scale},
      {"train_gcn_weights", c.train_gcn_weights},
  };
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.method = detail::enum_field<Method>(j, "method", parse_method);
  c.rank = j.at("rank").get<std::size_t>();
  c.knn_k = j.at("knn_k").get<std::size_t>();
  c.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
  c.activation = detail::enum_field<Activation>(j, "activation", parse_activation);
  c.final_activation = detail::enum_field<Activation>(j, "final_activation", parse_activation);
  c.optimizer = detail::enum_field<OptimizerKind>(j, "optimizer", parse_optimizer);
  c.learning_rate = j.at("learning_rate").get<double>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.graph_rebuild_period = j.at("graph_rebuild_period").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.split = j.at("split").get<std::array<double, 3>>();
  c.weighted_edges = j.at("weighted_edges").get<bool>();
  c.factor_init_scale = j.at("factor_init_scale").get<double>();
  c.train_gcn_weights = j.at("train_gcn_weights").get<bool>();
  return c;
}

inline nlohmann::json report_to_json(const TrainReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    rows.push_back({e.epoch, e.train_loss, e.train_nre, e.validation_nre});
  }
  return {
      {"config", config_to_json(r.config)},
      {"stop_reason", to_string(r.stop_reason)},
      {"best_epoch", r.best_epoch},
      {"best_validation_nre", r.best_validation_nre},
      {"test_nre", r.test_nre},
      {"graph_builds", r.graph_builds},
      {"wall_clock_seconds", r.wall_clock_seconds},
      {"epochs",
       {{"columns", {"epoch", "train_loss", "train_nre", "validation_nre"}}, {"rows", rows}}},
  };
}

inline TrainReport report_from_json(const nlohmann::json& j) {
  TrainReport r;
  r.config = config_from_json(j.at("config"));
  r.stop_reason = detail::enum_field<StopReason>(j, "stop_reason", parse_stop_reason);
  r.best_epoch = j.at("best_epoch").get<std::size_t>();
  r.best_validation_nre = j.at("best_validation_nre").get<double>();
  r.test_nre = j.at("test_nre").get<double>();
  r.graph_builds = j.at("graph_builds").get<std::size_t>();
  r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  const auto& table = j.at("epochs");
  if (table.at("columns").size() != 4) throw ParseError("epoch table must have 4 columns");
  for (const auto& row : table.at("rows")) {
    if (!row.is_array() || row.size() != 4) throw ParseError("epoch row must have 4 fields");
    r.epochs.push_back({row[0].get<std::size_t>(), row[1].get<double>(), row[2].get<double>(),
                        row[3].get<double>()});
  }
  if (r.epochs.empty()) throw ParseError("report has no epoch records");
  return r;
}

inline std::string format_report(const ReportDocument& doc) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : doc.runs) runs.push_back(report_to_json(r));
  // nlohmann::json sorts object keys, so the field order is stable.
  nlohmann::json j = {
      {"schema", kReportSchemaName},
      {"schema_version", kReportSchemaVersion},
      {"dataset", doc.dataset},
      {"defaulted_settings", doc.defaulted_settings},
      {"runs", runs},
  };
  std::ostringstream out;
  detail::dump_rows(out, j, 0);
  out << '\n';
  return out.str();
}

inline ReportDocument parse_report(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema").get<std::string>() != kReportSchemaName) {
      throw ParseError("not a " + std::string(kReportSchemaName) + " document");
    }
    const int version = j.at("schema_version").get<int>();
    if (version != kReportSchemaVersion) {
      throw ParseError("unsupported report schema version " + std::to_string(version));
    }
    ReportDocument doc;
    doc.dataset = j.at("dataset");
    doc.defaulted_settings = j.at("defaulted_settings").get<std::vector<std::string>>();
    for (const auto& r : j.at("runs")) doc.runs.push_back(report_from_json(r));
    return doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
}

inline void write_report(const ReportDocument& doc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << format_report(doc);
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline void write_report(const TrainReport& report, const std::string& path) {
  write_report(ReportDocument{nlohmann::json::object(), {}, {report}}, path);
}

inline ReportDocument read_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_report(text.str());
}

}  // namespace tgl
