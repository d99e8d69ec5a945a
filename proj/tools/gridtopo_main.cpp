#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gridtopo/error.hpp"
#include "gridtopo/ingest.hpp"
#include "gridtopo/pipeline.hpp"
#include "gridtopo/report.hpp"
#include "gridtopo/synth.hpp"

namespace fs = std::filesystem;
using gridtopo::pipeline::PipelineConfig;
using nlohmann::ordered_json;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw gridtopo::IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spill(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw gridtopo::IoError("cannot write " + path.string());
  out << body;
}

// every tunable a subcommand may override; values land here, and count()
// on the subcommand decides whether they beat the config file
struct Overrides {
  std::string config_path;
  PipelineConfig v;
  double v_min = 0.0, v_max = 0.0;
  std::string sweep;

  void apply(const CLI::App* app, PipelineConfig& cfg) const {
    auto on = [&](const char* flag) { return app->count(flag) > 0; };
    if (on("--meters")) cfg.meters_csv = v.meters_csv;
    if (on("--transformers")) cfg.transformers_csv = v.transformers_csv;
    if (on("--series")) cfg.series_csv = v.series_csv;
    if (on("--outages")) cfg.outages_csv = v.outages_csv;
    if (on("--truth")) cfg.truth_csv = v.truth_csv;
    if (on("--interval")) cfg.interval_s = v.interval_s;
    if (on("--tau")) cfg.tau = v.tau;
    if (on("--epsilon")) cfg.epsilon = v.epsilon;
    if (on("--min-overlap")) cfg.min_overlap = v.min_overlap;
    if (on("--k")) cfg.k = v.k;
    if (on("--mi-bins")) cfg.mi_bins = v.mi_bins;
    if (on("--mi-only")) cfg.mi_only = true;
    if (on("--restarts")) cfg.kmeans_restarts = v.kmeans_restarts;
    if (on("--max-iter")) cfg.kmeans_max_iter = v.kmeans_max_iter;
    if (on("--w-dbi")) cfg.w_dbi = v.w_dbi;
    if (on("--w-corr")) cfg.w_corr = v.w_corr;
    if (on("--review-threshold")) cfg.review_threshold = v.review_threshold;
    if (on("--dbi-false-aggregate")) cfg.dbi_false_aggregate = v.dbi_false_aggregate;
    if (on("--power-factor")) cfg.power_factor = v.power_factor;
    if (on("--v-min")) cfg.v_min = v_min;
    if (on("--v-max")) cfg.v_max = v_max;
    if (on("--persistence")) cfg.persistence = v.persistence;
    if (on("--min-completeness")) cfg.cleaning.min_completeness = v.cleaning.min_completeness;
    if (on("--iqr-k")) cfg.cleaning.iqr_k = v.cleaning.iqr_k;
    if (on("--geocoder")) cfg.geocoder = v.geocoder;
    if (on("--fixture-table")) cfg.fixture_table_csv = v.fixture_table_csv;
    if (on("--max-discrepancy")) cfg.max_discrepancy_m = v.max_discrepancy_m;
    if (on("--seed")) cfg.seed = v.seed;
    if (on("--parallel")) cfg.parallelism = v.parallelism;
    if (on("--out")) cfg.out_dir = v.out_dir;
    if (on("--emit-intermediate")) cfg.emit_intermediate = true;
    if (on("--stop-after")) cfg.stop_after = v.stop_after;
    if (on("--resume-from")) cfg.resume_from = v.resume_from;
  }
};

void add_common_flags(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "JSON config; flags override its values");
  app->add_option("--meters", o.v.meters_csv, "meter records CSV");
  app->add_option("--transformers", o.v.transformers_csv, "transformer records CSV");
  app->add_option("--series", o.v.series_csv, "interval voltage/load CSV");
  app->add_option("--outages", o.v.outages_csv, "outage log CSV");
  app->add_option("--truth", o.v.truth_csv, "ground-truth edges CSV (enables accuracy)");
  app->add_option("--interval", o.v.interval_s, "sample interval in seconds");
  app->add_option("--tau", o.v.tau, "distance-ratio threshold");
  app->add_option("--epsilon", o.v.epsilon, "correlation floor for electrical flags");
  app->add_option("--min-overlap", o.v.min_overlap, "minimum pairwise-complete samples");
  app->add_option("--k", o.v.k, "candidate transformers per outlier");
  app->add_option("--mi-bins", o.v.mi_bins, "histogram bins for mutual information");
  app->add_flag("--mi-only", "skip clustering, reconnect by mutual information");
  app->add_option("--restarts", o.v.kmeans_restarts, "k-means restarts");
  app->add_option("--max-iter", o.v.kmeans_max_iter, "k-means iteration cap");
  app->add_option("--w-dbi", o.v.w_dbi, "confidence weight on the DBI score");
  app->add_option("--w-corr", o.v.w_corr, "confidence weight on the correlation score");
  app->add_option("--review-threshold", o.v.review_threshold, "NEEDS_REVIEW cutoff");
  app->add_option("--dbi-false-aggregate", o.v.dbi_false_aggregate, "min or mean");
  app->add_option("--power-factor", o.v.power_factor, "assumed power factor");
  app->add_option("--v-min", o.v_min, "explicit lower voltage bound");
  app->add_option("--v-max", o.v_max, "explicit upper voltage bound");
  app->add_option("--persistence", o.v.persistence, "consecutive samples to call a violation");
  app->add_option("--min-completeness", o.v.cleaning.min_completeness, "keep threshold");
  app->add_option("--iqr-k", o.v.cleaning.iqr_k, "Tukey fence multiplier");
  app->add_option("--geocoder", o.v.geocoder, "none | fixture | http");
  app->add_option("--fixture-table", o.v.fixture_table_csv, "ADDRESS,LAT,LON lookup CSV");
  app->add_option("--max-discrepancy", o.v.max_discrepancy_m, "meters before geocode wins");
  app->add_option("--seed", o.v.seed, "RNG seed");
  app->add_option("--parallel", o.v.parallelism, "worker thread cap");
  app->add_option("--out", o.v.out_dir, "output directory");
  app->add_flag("--emit-intermediate", "write per-stage artifacts");
  app->add_option("--stop-after", o.v.stop_after, "halt after this stage");
  app->add_option("--resume-from", o.v.resume_from, "continue a stopped run here");
}

PipelineConfig make_config(const CLI::App* app, const Overrides& o) {
  PipelineConfig cfg;
  if (!o.config_path.empty()) cfg = gridtopo::pipeline::load_config(o.config_path);
  o.apply(app, cfg);
  return cfg;
}

// Pick the resume point for a stage subcommand: continue where the last run
// stopped, rerun the target when it already completed, start fresh when the
// directory is empty or the config changed.
std::string auto_resume(const PipelineConfig& cfg, const std::string& target) {
  fs::path sp = fs::path(cfg.out_dir) / "state.json";
  if (cfg.out_dir.empty() || !fs::exists(sp)) return "";
  ordered_json st = ordered_json::parse(slurp(sp), nullptr, false);
  if (st.is_discarded()) return "";
  if (st.value("fingerprint", ordered_json()) != gridtopo::pipeline::config_fingerprint(cfg))
    return "";
  std::set<std::string> done;
  for (const auto& s : st.at("completed")) done.insert(s.get<std::string>());
  const auto& names = gridtopo::pipeline::stage_names();
  for (const auto& name : names) {
    if (!done.count(name)) return name == names.front() ? "" : name;
    if (name == target) return target;
  }
  return target;
}

void stage_summary(const PipelineConfig& cfg, const std::string& stage) {
  fs::path sp = fs::path(cfg.out_dir) / "state.json";
  if (!fs::exists(sp)) return;
  ordered_json st = ordered_json::parse(slurp(sp), nullptr, false);
  if (st.is_discarded()) return;
  const auto& secs = st.at("sections");
  auto has = [&](const char* k) { return secs.contains(k); };
  if (stage == "ingest" || stage == "geocode") {
    if (has("ingest")) {
      const auto& s = secs.at("ingest");
      std::cout << "ingested " << s.value("premises", 0) << " premises, "
                << s.value("transformers", 0) << " transformers, " << s.value("timesteps", 0)
                << " steps\n";
    }
  } else if (stage == "detect") {
    if (has("detect")) {
      const auto& s = secs.at("detect");
      std::cout << s.at("flags").size() << " premises flagged (geographic "
                << s.value("geographic", 0) << ", electrical " << s.value("electrical", 0)
                << ", both " << s.value("both", 0) << ")\n";
    }
  } else if (stage == "reconnect") {
    if (has("reconnect")) {
      const auto& s = secs.at("reconnect");
      std::cout << s.at("reassignments").size() << " premises moved, "
                << s.at("confirmed").size() << " confirmed in place, "
                << s.at("unreassigned").size() << " unresolved\n";
    }
  } else if (stage == "confidence") {
    if (has("confidence")) {
      const auto& s = secs.at("confidence");
      std::size_t review = 0;
      for (const auto& e : s.at("entries"))
        if (e.value("needs_review", false)) ++review;
      std::cout << s.at("entries").size() << " reassignments scored, " << review
                << " need review\n";
    }
  } else if (stage == "refine" || stage == "validate") {
    if (has("validate")) {
      const auto& s = secs.at("validate");
      std::cout << s.at("capacity_violations").size() << " capacity and "
                << s.at("voltage_violations").size() << " voltage violations before refinement\n";
    }
    if (has("refine")) {
      const auto& s = secs.at("refine");
      std::cout << s.at("moves").size() << " refinement moves, " << s.at("unresolved").size()
                << " transformers unresolved, " << s.at("capacity_violations_after").size()
                << " violations remain\n";
    }
  }
  std::cout << "artifacts in " << cfg.out_dir << "\n";
}

int run_stage_command(const CLI::App* app, const Overrides& o, const std::string& stop) {
  PipelineConfig cfg = make_config(app, o);
  cfg.stop_after = stop;
  if (cfg.resume_from.empty()) cfg.resume_from = auto_resume(cfg, stop);
  gridtopo::pipeline::RunReport rep = gridtopo::pipeline::run_pipeline(cfg);
  stage_summary(cfg, stop);
  if (stop == "refine" && !rep.unresolved.empty()) return 3;
  return 0;
}

void write_plots(const PipelineConfig& cfg, const ordered_json& canonical) {
  fs::path dir(cfg.out_dir);
  if (!fs::exists(dir / "topology.json")) {
    std::cerr << "plots skipped: no topology artifact (rerun with --emit-intermediate)\n";
    return;
  }
  gridtopo::Topology topo =
      gridtopo::pipeline::topology_from_json(ordered_json::parse(slurp(dir / "topology.json")));
  std::vector<gridtopo::reconnect::Reassignment> moves;
  std::vector<std::string> moved_ids;
  if (canonical.contains("reconnection")) {
    for (const auto& e : canonical.at("reconnection").at("reassignments")) {
      gridtopo::reconnect::Reassignment m;
      m.premise_id = e.at("premise_id").get<std::string>();
      m.old_transformer = e.at("old_transformer").get<std::string>();
      m.new_transformer = e.at("new_transformer").get<std::string>();
      moved_ids.push_back(m.premise_id);
      moves.push_back(std::move(m));
    }
  }
  spill(dir / "map.svg", gridtopo::report::map_svg(topo, moves));

  fs::path series_path = dir / "series_clean.csv";
  if (!fs::exists(series_path)) series_path = dir / "series_raw.csv";
  if (fs::exists(series_path)) {
    try {
      gridtopo::SeriesFrame frame =
          gridtopo::ingest::load_series(series_path.string(), cfg.interval_s);
      if (moved_ids.empty())
        for (const auto& [pid, ch] : frame.premises) {
          moved_ids.push_back(pid);
          if (moved_ids.size() >= 12) break;
        }
      spill(dir / "voltage.svg", gridtopo::report::voltage_svg(frame, moved_ids));
    } catch (const gridtopo::Error& e) {
      std::cerr << "voltage plot skipped: " << e.what() << "\n";
    }
  }
}

std::vector<std::size_t> parse_sweep(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    unsigned long k = std::stoul(item, &pos);
    if (pos != item.size()) throw gridtopo::ConfigError("bad k list: '" + text + "'");
    ks.push_back(k);
  }
  if (ks.empty()) throw gridtopo::ConfigError("empty k list");
  return ks;
}

int cmd_pipeline(const CLI::App* app, const Overrides& o) {
  PipelineConfig cfg = make_config(app, o);

  if (!o.sweep.empty()) {
    std::vector<std::size_t> ks = parse_sweep(o.sweep);
    gridtopo::ingest::AssetLoad assets =
        gridtopo::ingest::load_assets(cfg.meters_csv, cfg.transformers_csv);
    gridtopo::pipeline::PipelineInput input;
    input.topology = std::move(assets.topology);
    input.input_warnings = std::move(assets.warnings);
    input.series = gridtopo::ingest::load_series(cfg.series_csv, cfg.interval_s);
    if (!cfg.outages_csv.empty()) input.outages = gridtopo::ingest::load_outages(cfg.outages_csv);
    if (!cfg.truth_csv.empty()) input.truth = gridtopo::ingest::load_edges(cfg.truth_csv);
    gridtopo::pipeline::GeocoderHandle geo = gridtopo::pipeline::make_geocoder(cfg);
    auto rows = gridtopo::pipeline::k_sweep(input, cfg, ks, geo.client);
    std::cout << "K,REASSIGNMENTS,AGREEMENT_VS_FIRST\n";
    for (const auto& row : rows) {
      char line[96];
      std::snprintf(line, sizeof(line), "%zu,%zu,%.4f\n", row.k, row.reassignments,
                    row.agreement);
      std::cout << line;
    }
    return 0;
  }

  gridtopo::pipeline::RunReport rep = gridtopo::pipeline::run_pipeline(cfg);
  if (!rep.stopped_after.empty()) {
    std::cout << "stopped after stage " << rep.stopped_after << "; artifacts in "
              << cfg.out_dir << "\n";
    return 0;
  }
  std::string text = gridtopo::report::render_text(rep.canonical, rep.stage_seconds);
  std::cout << text;
  spill(fs::path(cfg.out_dir) / "report.txt", text);
  if (cfg.emit_intermediate) write_plots(cfg, rep.canonical);
  return rep.unresolved.empty() ? 0 : 3;
}

int cmd_report(const std::string& dir_arg, bool plots) {
  fs::path dir(dir_arg);
  ordered_json canonical = ordered_json::parse(slurp(dir / "report.json"), nullptr, false);
  if (canonical.is_discarded())
    throw gridtopo::DataError((dir / "report.json").string() + ": not valid JSON");
  std::cout << gridtopo::report::render_text(canonical);
  if (plots) {
    PipelineConfig cfg;
    cfg.out_dir = dir_arg;
    if (canonical.contains("input"))
      cfg.interval_s = canonical.at("input").value("interval_s", 900);
    write_plots(cfg, canonical);
  }
  return 0;
}

int cmd_synth(const gridtopo::synth::SynthConfig& sc, const std::string& out, bool overload) {
  gridtopo::synth::SynthBundle bundle =
      overload ? gridtopo::synth::generate_overload_scenario(sc) : gridtopo::synth::generate(sc);
  gridtopo::synth::export_bundle(bundle, out);
  std::cout << "wrote " << bundle.truth.premises.size() << " premises, "
            << bundle.truth.transformers.size() << " transformers, "
            << bundle.series.size() << " steps, " << bundle.corruption_log.size()
            << " corruptions to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meter-to-transformer connectivity reconstruction"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic feeder bundle");
  gridtopo::synth::SynthConfig sc;
  std::string synth_out;
  bool synth_overload = false;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", sc.seed, "RNG seed");
  synth->add_option("--transformers", sc.n_transformers, "transformer count");
  synth->add_option("--premises-min", sc.premises_min, "min premises per transformer");
  synth->add_option("--premises-max", sc.premises_max, "max premises per transformer");
  synth->add_option("--steps", sc.n_steps, "time steps");
  synth->add_option("--interval", sc.step_seconds, "step seconds");
  synth->add_option("--corruption", sc.corruption_fraction, "fraction of premises rewired");
  synth->add_option("--missing", sc.missing_fraction, "per-sample dropout fraction");
  synth->add_option("--missing-nominal", sc.missing_nominal_fraction,
                    "premises without a recorded nominal");
  synth->add_option("--missing-location", sc.missing_location_fraction,
                    "premises without coordinates");
  synth->add_option("--outage-count", sc.outage_count, "number of planted outages");
  synth->add_flag("--overload", synth_overload, "plant capacity violations");

  // stage subcommands share one override block each
  Overrides o_ingest, o_detect, o_reconnect, o_confidence, o_validate, o_pipeline;
  auto* ingest = app.add_subcommand("ingest", "load and refine the input records");
  add_common_flags(ingest, o_ingest);
  auto* detect = app.add_subcommand("detect", "flag geographic and electrical outliers");
  add_common_flags(detect, o_detect);
  auto* reconnect = app.add_subcommand("reconnect", "reassign flagged premises");
  add_common_flags(reconnect, o_reconnect);
  auto* confidence = app.add_subcommand("confidence", "score reassignments by falsification");
  add_common_flags(confidence, o_confidence);
  auto* validate = app.add_subcommand("validate", "check physical limits and refine overloads");
  add_common_flags(validate, o_validate);
  auto* pipeline = app.add_subcommand("pipeline", "run every stage end to end");
  add_common_flags(pipeline, o_pipeline);
  pipeline->add_option("--sweep-k", o_pipeline.sweep, "comma-separated k values to compare");

  auto* report = app.add_subcommand("report", "render a finished run");
  std::string report_dir;
  bool report_plots = false;
  report->add_option("--dir", report_dir, "run output directory")->required();
  report->add_flag("--plots", report_plots, "emit map.svg and voltage.svg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(sc, synth_out, synth_overload);
    if (ingest->parsed()) return run_stage_command(ingest, o_ingest, "geocode");
    if (detect->parsed()) return run_stage_command(detect, o_detect, "detect");
    if (reconnect->parsed()) return run_stage_command(reconnect, o_reconnect, "reconnect");
    if (confidence->parsed()) return run_stage_command(confidence, o_confidence, "confidence");
    if (validate->parsed()) return run_stage_command(validate, o_validate, "refine");
    if (pipeline->parsed()) return cmd_pipeline(pipeline, o_pipeline);
    if (report->parsed()) return cmd_report(report_dir, report_plots);
  } catch (const gridtopo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const gridtopo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
