// emf — spectral-trace device fingerprinting toolkit.
//
// Subcommands: synth, extract, train, classify, evaluate, rank, heatmap.
// Machine-readable results go to stdout or --out files; progress and
// errors go to stderr. Exit codes are part of the interface:
//   0 success / Authorized
//   1 Rejected (classify only)
//   2 invalid arguments, I/O or parse failure
//   3 training failure
// Options honor environment variables with the EMF_ prefix
// (flag > environment > default).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emf/evaluation.hpp"
#include "emf/features.hpp"
#include "emf/numio.hpp"
#include "emf/ocsvm.hpp"
#include "emf/pipeline.hpp"
#include "emf/prng.hpp"
#include "emf/ranking.hpp"
#include "emf/registry.hpp"
#include "emf/synth.hpp"
#include "emf/trace.hpp"

namespace fs = std::filesystem;
using namespace emf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRejected = 1;
constexpr int kExitUsageOrIo = 2;
constexpr int kExitTraining = 3;

struct LayoutOpts {
  double window_ms = 1080.0;
  std::uint32_t time_splits = 4;
  std::uint32_t freq_splits = 15;
  double band_start_hz = -1.0;  // < 0: take the instrument band from the traces
  double band_stop_hz = -1.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--window-ms", window_ms, "Observation window length in ms")->envname("EMF_WINDOW_MS");
    cmd->add_option("--time-splits", time_splits, "Time regions per window")->envname("EMF_TIME_SPLITS");
    cmd->add_option("--freq-splits", freq_splits, "Frequency cells per time region")->envname("EMF_FREQ_SPLITS");
    cmd->add_option("--band-start-hz", band_start_hz, "Layout band start (default: instrument band)");
    cmd->add_option("--band-stop-hz", band_stop_hz, "Layout band stop (default: instrument band)");
  }

  RegionLayout resolve(const InstrumentFormat& inst) const {
    RegionLayout layout;
    layout.window_ms = window_ms;
    layout.time_splits = time_splits;
    layout.freq_splits = freq_splits;
    layout.band_start_hz = band_start_hz < 0.0 ? inst.start_hz : band_start_hz;
    layout.band_stop_hz = band_stop_hz < 0.0 ? inst.stop_hz : band_stop_hz;
    layout.validate();
    return layout;
  }
};

struct SvmOpts {
  double nu = 0.1;
  double gamma = 0.0;
  double tol = 1e-4;
  std::size_t max_iter = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--nu", nu, "One-class SVM nu in (0,1]")->envname("EMF_NU");
    cmd->add_option("--gamma", gamma, "RBF gamma (0 = auto)")->envname("EMF_GAMMA");
    cmd->add_option("--tol", tol, "SMO convergence tolerance")->envname("EMF_TOL");
    cmd->add_option("--max-iter", max_iter, "SMO pair-update cap (0 = 100000*N)");
  }

  OcsvmParams resolve() const { return {nu, gamma, tol, max_iter}; }
};

struct OnsetOpts {
  double baseline_ms = 200.0;
  double k_sigma = 5.0;
  bool no_align = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--baseline-ms", baseline_ms, "Onset baseline duration in ms")->envname("EMF_BASELINE_MS");
    cmd->add_option("--k-sigma", k_sigma, "Onset excursion threshold in baseline sigmas")->envname("EMF_K_SIGMA");
    cmd->add_flag("--no-align", no_align, "Window traces at t=0 instead of the detected boot onset");
  }
};

std::vector<fs::path> trace_files_in(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

SpectralTrace parse_trace_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoFailure("cannot open trace file " + file.string());
  try {
    return parse_trace(in, file.stem().string());
  } catch (const std::exception& e) {
    throw IoFailure(file.string() + ": " + e.what());
  }
}

std::vector<LabeledVector> features_from_corpus(const fs::path& corpus_dir, const LayoutOpts& layout_opts,
                                                const OnsetOpts& onset_opts) {
  auto traces = load_corpus(corpus_dir);
  if (traces.empty()) throw IoFailure("corpus " + corpus_dir.string() + " is empty");
  PipelineParams pp;
  pp.layout = layout_opts.resolve(traces.front().format);
  pp.onset = {onset_opts.baseline_ms, onset_opts.k_sigma};
  pp.align = !onset_opts.no_align;
  return corpus_to_features(traces, pp);
}

std::vector<LabeledVector> load_feature_input(const std::string& features_file, const std::string& corpus_dir,
                                              const LayoutOpts& layout_opts, const OnsetOpts& onset_opts) {
  if (!features_file.empty()) {
    std::ifstream in(features_file);
    if (!in) throw IoFailure("cannot open features file " + features_file);
    return read_features_csv(in);
  }
  return features_from_corpus(corpus_dir, layout_opts, onset_opts);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  return out;
}

std::vector<int> label_ids(const std::vector<LabeledVector>& rows) {
  std::map<std::string, int> ids;
  for (const auto& row : rows) {
    if (!row.label) throw IoFailure("sample " + row.source_id + " has no label");
    ids.emplace(*row.label, 0);
  }
  int next = 0;
  for (auto& [label, id] : ids) id = next++;
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(ids[*row.label]);
  return out;
}

double mean_per_class_tpr(const ScoreMatrix& m, const std::map<std::string, double>& thresholds) {
  double total = 0.0;
  for (const auto& label : m.class_labels)
    total += tpr_fpr(detail::single_column(m, label), thresholds.at(label)).tpr;
  return total / static_cast<double>(m.class_labels.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral-trace device fingerprinting toolkit"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic trace corpus");
  std::string synth_scenario = "1";
  std::string synth_out;
  std::uint64_t synth_seed = 1;
  std::uint32_t synth_classes = 0, synth_traces = 10;
  synth->add_option("--scenario", synth_scenario, "Corpus shape: 1 (17 brands), 2 (15 same-model units), fw (firmware variants)")
      ->check(CLI::IsMember({"1", "2", "fw"}));
  synth->add_option("--out", synth_out, "Output corpus directory")->required();
  synth->add_option("--seed", synth_seed, "Corpus seed")->envname("EMF_SEED");
  synth->add_option("--classes", synth_classes, "Override class count (0 = scenario default)");
  synth->add_option("--traces-per-class", synth_traces, "Traces per class");

  // ---- extract ----
  auto* extract = app.add_subcommand("extract", "Extract feature vectors from a corpus into a CSV");
  std::string extract_corpus, extract_out;
  LayoutOpts extract_layout;
  OnsetOpts extract_onset;
  extract->add_option("--corpus", extract_corpus, "Corpus directory (with manifest.csv)")->required();
  extract->add_option("--out", extract_out, "Output features CSV")->required();
  extract_layout.attach(extract);
  extract_onset.attach(extract);

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "Train a device profile from a directory of traces");
  std::string train_dir, train_label, train_registry;
  bool train_replace = false;
  LayoutOpts train_layout;
  SvmOpts train_svm;
  OnsetOpts train_onset;
  train_cmd->add_option("--traces", train_dir, "Directory of trace CSV files")->required();
  train_cmd->add_option("--label", train_label, "Device class label")->required();
  train_cmd->add_option("--registry", train_registry, "Profile registry directory")->required()->envname("EMF_REGISTRY");
  train_cmd->add_flag("--replace", train_replace, "Overwrite an existing profile with the same label");
  train_layout.attach(train_cmd);
  train_svm.attach(train_cmd);
  train_onset.attach(train_cmd);

  // ---- classify ----
  auto* classify = app.add_subcommand("classify", "Score a trace against every stored profile");
  std::string classify_trace, classify_registry, classify_thresholds, classify_strict;
  double classify_threshold = 0.0;
  bool classify_threshold_set = false;
  OnsetOpts classify_onset;
  classify->add_option("--trace", classify_trace, "Trace CSV file (with metadata header)")->required();
  classify->add_option("--registry", classify_registry, "Profile registry directory")->required()->envname("EMF_REGISTRY");
  auto* thr_opt = classify->add_option("--threshold", classify_threshold, "Common decision threshold (default 0)")
                      ->envname("EMF_THRESHOLD");
  classify->add_option("--thresholds", classify_thresholds, "Per-class thresholds CSV (label,threshold)");
  classify->add_option("--strict-label", classify_strict, "Only test against this profile");
  classify_onset.attach(classify);

  // ---- evaluate ----
  auto* evaluate = app.add_subcommand("evaluate", "Cross-validate a corpus and select thresholds");
  std::string eval_corpus, eval_features, eval_out;
  LayoutOpts eval_layout;
  SvmOpts eval_svm;
  OnsetOpts eval_onset;
  std::uint32_t eval_k = 10;
  std::uint64_t eval_seed = 0;
  double eval_fpr_cap = 0.01;
  bool eval_per_class = false, eval_latency = false;
  evaluate->add_option("--corpus", eval_corpus, "Corpus directory (with manifest.csv)");
  evaluate->add_option("--features", eval_features, "Features CSV (alternative to --corpus)");
  evaluate->add_option("--out", eval_out, "Output directory")->required();
  evaluate->add_option("--k", eval_k, "Cross-validation folds")->envname("EMF_K");
  evaluate->add_option("--seed", eval_seed, "Fold shuffle seed")->envname("EMF_SEED");
  evaluate->add_option("--fpr-cap", eval_fpr_cap, "FPR cap for threshold selection")->envname("EMF_FPR_CAP");
  evaluate->add_flag("--per-class", eval_per_class, "Select one threshold per class instead of a common one");
  evaluate->add_flag("--measure-latency", eval_latency, "Measure per-decision latency (adds timing keys)");
  eval_layout.attach(evaluate);
  eval_svm.attach(evaluate);
  eval_onset.attach(evaluate);

  // ---- rank ----
  auto* rank = app.add_subcommand("rank", "Rank features by mutual information with the class label");
  std::string rank_corpus, rank_features_file, rank_out, rank_method = "mim", rank_out_features, rank_eval_k;
  LayoutOpts rank_layout;
  SvmOpts rank_svm;
  OnsetOpts rank_onset;
  std::uint32_t rank_bins = 8, rank_k_folds = 10;
  std::size_t rank_k = 0;
  std::uint64_t rank_seed = 0;
  double rank_fpr_cap = 0.01;
  rank->add_option("--corpus", rank_corpus, "Corpus directory (with manifest.csv)");
  rank->add_option("--features", rank_features_file, "Features CSV (alternative to --corpus)");
  rank->add_option("--out", rank_out, "Ranking CSV output")->required();
  rank->add_option("--method", rank_method, "Ranking criterion")->check(CLI::IsMember({"mim", "jmi"}));
  rank->add_option("--bins", rank_bins, "Discretization bins")->envname("EMF_BINS");
  rank->add_option("--k", rank_k, "Features to select greedily (0 = all)");
  rank->add_option("--out-features", rank_out_features, "Write the top-k feature subset as a features CSV");
  rank->add_option("--eval-k", rank_eval_k, "Comma-separated subset sizes to re-evaluate (writes table.csv)");
  rank->add_option("--folds", rank_k_folds, "Folds for --eval-k")->envname("EMF_K");
  rank->add_option("--seed", rank_seed, "Fold shuffle seed for --eval-k")->envname("EMF_SEED");
  rank->add_option("--fpr-cap", rank_fpr_cap, "FPR cap for --eval-k")->envname("EMF_FPR_CAP");
  rank_layout.attach(rank);
  rank_svm.attach(rank);
  rank_onset.attach(rank);

  // ---- heatmap ----
  auto* heatmap = app.add_subcommand("heatmap", "Export a normalized-power color-band grid for a trace");
  std::string heat_trace, heat_out;
  std::uint32_t heat_tbins = 40, heat_fbins = 30;
  heatmap->add_option("--trace", heat_trace, "Trace CSV file (with metadata header)")->required();
  heatmap->add_option("--out", heat_out, "Output CSV grid")->required();
  heatmap->add_option("--time-bins", heat_tbins, "Grid rows");
  heatmap->add_option("--freq-bins", heat_fbins, "Grid columns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsageOrIo;
  }
  classify_threshold_set = thr_opt->count() > 0;

  try {
    if (*synth) {
      CorpusSpec spec;
      if (synth_scenario == "1") {
        spec = scenario1_spec(synth_seed, synth_classes ? synth_classes : 17, synth_traces);
      } else if (synth_scenario == "2") {
        spec = scenario2_spec(synth_seed, synth_classes ? synth_classes : 15, synth_traces);
      } else {
        spec = firmware_spec(synth_seed, synth_classes ? synth_classes - 1 : 6, synth_traces);
      }
      write_corpus(spec, synth_out);
      std::cerr << "wrote " << spec.archetypes.size() * spec.traces_per_class << " traces to " << synth_out << '\n';
      return kExitOk;
    }

    if (*extract) {
      auto rows = features_from_corpus(extract_corpus, extract_layout, extract_onset);
      auto out = open_out(extract_out);
      write_features_csv(out, rows);
      std::cerr << "wrote " << rows.size() << " feature rows (" << rows.front().values.size() << " features)\n";
      return kExitOk;
    }

    if (*train_cmd) {
      auto files = trace_files_in(train_dir);
      if (files.size() < 2) {
        std::cerr << "error: need >= 2 traces, found " << files.size() << " in " << train_dir << '\n';
        return kExitTraining;
      }
      std::vector<SpectralTrace> traces;
      try {
        for (const auto& f : files) traces.push_back(parse_trace_file(f));
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsageOrIo;
      }
      PipelineParams pp;
      pp.layout = train_layout.resolve(traces.front().format);
      pp.onset = {train_onset.baseline_ms, train_onset.k_sigma};
      pp.align = !train_onset.no_align;
      std::vector<std::vector<double>> rows;
      std::vector<std::string> ids;
      for (const auto& trace : traces) {
        FeatureVector fv = trace_to_features(trace, pp);
        rows.push_back(std::move(fv.values));
        ids.push_back(trace.source_id);
      }
      DeviceProfile profile;
      profile.class_label = train_label;
      profile.model = train(rows, train_svm.resolve(), train_label);
      profile.layout = pp.layout;
      profile.instrument = traces.front().format;
      profile.created_at = iso8601_utc_now();
      profile.training_trace_ids = std::move(ids);
      store_profile(train_registry, profile, train_replace);
      std::cout << "stored " << train_label << " n=" << rows.size() << '\n';
      return kExitOk;
    }

    if (*classify) {
      auto profiles = load_all(classify_registry);
      if (!classify_strict.empty()) {
        std::erase_if(profiles, [&](const DeviceProfile& p) { return p.class_label != classify_strict; });
        if (profiles.empty()) {
          std::cerr << "error: no profile with label " << classify_strict << '\n';
          return kExitUsageOrIo;
        }
      }
      if (profiles.empty()) {
        std::cerr << "error: no profiles in registry " << classify_registry << '\n';
        return kExitUsageOrIo;
      }
      std::map<std::string, double> per_class;
      if (!classify_thresholds.empty()) {
        std::ifstream in(classify_thresholds);
        if (!in) throw IoFailure("cannot open thresholds file " + classify_thresholds);
        per_class = read_thresholds_csv(in);
      }
      SpectralTrace trace = parse_trace_file(classify_trace);

      bool any_authorized = false;
      std::map<std::string, FeatureVector> by_layout;  // keyed by layout geometry
      for (const auto& profile : profiles) {
        const RegionLayout& layout = profile.layout;
        const std::string key = fmt_double(layout.window_ms) + "/" + fmt_double(layout.band_start_hz) + "/" +
                                fmt_double(layout.band_stop_hz) + "/" + std::to_string(layout.time_splits) + "/" +
                                std::to_string(layout.freq_splits);
        auto it = by_layout.find(key);
        if (it == by_layout.end()) {
          PipelineParams pp;
          pp.layout = layout;
          pp.onset = {classify_onset.baseline_ms, classify_onset.k_sigma};
          pp.align = !classify_onset.no_align;
          it = by_layout.emplace(key, trace_to_features(trace, pp)).first;
        }
        // per-class file > common --threshold (flag or EMF_THRESHOLD) > 0
        double threshold = 0.0;
        if (!per_class.empty()) {
          auto t = per_class.find(profile.class_label);
          if (t == per_class.end()) {
            std::cerr << "error: thresholds file has no entry for " << profile.class_label << '\n';
            return kExitUsageOrIo;
          }
          threshold = t->second;
        } else if (classify_threshold_set) {
          threshold = classify_threshold;
        }
        const double s = score(profile.model, it->second.values);
        const Verdict v = decide(s, threshold);
        any_authorized = any_authorized || v == Verdict::Authorized;
        std::cout << profile.class_label << ' ' << fmt_double(s) << ' ' << to_string(v) << '\n';
      }
      return any_authorized ? kExitOk : kExitRejected;
    }

    if (*evaluate) {
      if (eval_corpus.empty() == eval_features.empty()) {
        std::cerr << "error: pass exactly one of --corpus or --features\n";
        return kExitUsageOrIo;
      }
      auto rows = load_feature_input(eval_features, eval_corpus, eval_layout, eval_onset);
      CvParams cv{eval_k, eval_svm.resolve(), eval_seed};
      ScoreMatrix m = cross_validate(rows, cv);

      EvaluationReport report;
      std::map<std::string, double> thresholds;
      if (eval_per_class) {
        thresholds = per_class_thresholds(m, eval_fpr_cap);
        report = tpr_fpr(m, thresholds);
        report.threshold.reset();
      } else {
        auto [t, rep] = best_common_threshold(m, eval_fpr_cap);
        report = rep;
      }
      report.fold_count = eval_k;
      report.seed = eval_seed;

      if (eval_latency) {
        std::map<std::string, std::vector<std::vector<double>>> by_label;
        for (const auto& row : rows) by_label[*row.label].push_back(row.values);
        std::vector<OneClassModel> models;
        for (const auto& [label, mat] : by_label) models.push_back(train(mat, eval_svm.resolve(), label));
        std::vector<std::vector<double>> probes;
        for (const auto& row : rows) probes.push_back(row.values);
        report.timing = measure_decision_latency(models, probes);
      }

      const fs::path out_dir(eval_out);
      fs::create_directories(out_dir);
      {
        auto out = open_out(out_dir / "score_matrix.csv");
        write_score_matrix_csv(out, m);
      }
      if (eval_per_class) {
        auto out = open_out(out_dir / "thresholds.csv");
        write_thresholds_csv(out, thresholds);
        std::cerr << "mean per-class TPR " << mean_per_class_tpr(m, thresholds) << '\n';
      }
      {
        auto out = open_out(out_dir / "summary.txt");
        write_summary(out, report);
      }
      std::cerr << "tpr=" << report.tpr << " fpr=" << (report.fpr ? fmt_double(*report.fpr) : "n/a") << '\n';
      return kExitOk;
    }

    if (*rank) {
      if (rank_corpus.empty() == rank_features_file.empty()) {
        std::cerr << "error: pass exactly one of --corpus or --features\n";
        return kExitUsageOrIo;
      }
      auto rows = load_feature_input(rank_features_file, rank_corpus, rank_layout, rank_onset);
      std::vector<std::vector<double>> X;
      for (const auto& row : rows) X.push_back(row.values);
      const auto labels = label_ids(rows);
      const RankMethod method = rank_method == "jmi" ? RankMethod::JMI : RankMethod::MIM;
      const std::size_t d = X[0].size();
      const std::size_t greedy_k = rank_k == 0 ? d : rank_k;
      RankedFeatures ranked = rank_features(X, labels, method, rank_bins, greedy_k);
      {
        auto out = open_out(rank_out);
        write_ranking_csv(out, ranked);
      }
      if (!rank_out_features.empty()) {
        auto sliced = slice_top_k(rows, ranked, greedy_k);
        auto out = open_out(rank_out_features);
        write_features_csv(out, sliced);
      }
      if (!rank_eval_k.empty()) {
        std::vector<std::size_t> ks;
        for (auto part : split_csv_line(rank_eval_k)) {
          std::uint64_t v = 0;
          if (!parse_u64(trim(part), v) || v == 0) throw IoFailure("bad --eval-k list");
          ks.push_back(static_cast<std::size_t>(v));
        }
        CvParams cv{rank_k_folds, rank_svm.resolve(), rank_seed};
        auto table = evaluate_top_k(rows, ranked, ks, cv, rank_fpr_cap);
        fs::path table_path = fs::path(rank_out).parent_path() / "table.csv";
        auto out = open_out(table_path);
        write_top_k_csv(out, table);
        std::cerr << "wrote top-k table to " << table_path.string() << '\n';
      }
      return kExitOk;
    }

    if (*heatmap) {
      SpectralTrace trace = parse_trace_file(heat_trace);
      auto grid = heatmap_grid(normalize(trace), heat_tbins, heat_fbins);
      auto out = open_out(heat_out);
      write_heatmap_csv(out, grid);
      return kExitOk;
    }
  } catch (const NotConverged& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitTraining;
  } catch (const DuplicateLabel& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitTraining;
  } catch (const NonFiniteInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitTraining;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsageOrIo;
  }
  return kExitUsageOrIo;
}
