#include "scenestat/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "scenestat/baseline.hpp"
#include "scenestat/errors.hpp"
#include "scenestat/eval.hpp"
#include "scenestat/ingest.hpp"
#include "scenestat/motifs.hpp"
#include "scenestat/persist.hpp"
#include "scenestat/stats.hpp"
#include "scenestat/util.hpp"

namespace scenestat::cli {

namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct DataArgs {
  std::string corpus;
  std::string vocab;
  std::string splits;
  unsigned jobs = 1;
  std::size_t dev_size = 0;
  std::uint64_t seed = 0;
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--corpus", a.corpus, "graphs.jsonl corpus")->required();
  cmd->add_option("--vocab", a.vocab, "vocab.json")->required();
  cmd->add_option("--splits", a.splits, "splits.json")->required();
  cmd->add_option("--jobs", a.jobs, "worker threads for per-image work")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--dev-size", a.dev_size,
                  "move this many train images into dev before running")
      ->capture_default_str();
  cmd->add_option("--seed", a.seed, "seed for every random choice")
      ->capture_default_str();
}

Dataset load(const DataArgs& a) {
  Dataset ds = load_dataset(a.corpus, a.vocab, a.splits, {a.jobs});
  if (a.dev_size > 0) ds = sample_dev_split(ds, a.dev_size, a.seed);
  return ds;
}

Dataset select(const Dataset& ds, const std::string& split) {
  if (split == "all") return ds;
  auto s = parse_split(split);
  if (!s) throw std::invalid_argument("unknown split '" + split + "'");
  return ds.subset(*s);
}

// Writes `text` to `path`, or to `out` when the path is empty.
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    write_file(path, text);
  }
}

// ---------------------------------------------------------------- stats

struct StatsArgs {
  DataArgs data;
  std::string split = "train";
  std::string eval_split;
  std::string supertypes;
  int max_k = 10;
  std::string out_dir;
  bool pretty = false;
};

std::string type_distribution_text(const TypeDistribution& td, bool pretty) {
  std::ostringstream os;
  if (pretty) {
    char buf[160];
    for (const auto* section : {&td.entities, &td.relations}) {
      os << (section == &td.entities ? "Entities\n" : "Relations\n");
      std::snprintf(buf, sizeof buf, "  %-12s %8s %12s %9s\n", "type", "classes",
                    "instances", "share");
      os << buf;
      for (const auto& r : *section) {
        std::snprintf(buf, sizeof buf, "  %-12s %8zu %12lld %8.1f%%\n",
                      r.supertype.c_str(), r.class_count,
                      static_cast<long long>(r.instance_count), 100 * r.fraction);
        os << buf;
      }
    }
    return os.str();
  }
  os << "section\tsupertype\tclasses\tinstances\tfraction\n";
  for (const auto& r : td.entities) {
    os << "entity\t" << r.supertype << '\t' << r.class_count << '\t'
       << r.instance_count << '\t' << num(r.fraction) << '\n';
  }
  for (const auto& r : td.relations) {
    os << "relation\t" << r.supertype << '\t' << r.class_count << '\t'
       << r.instance_count << '\t' << num(r.fraction) << '\n';
  }
  return os.str();
}

std::string edge_matrix_text(const EdgeTypeMatrix& m) {
  std::ostringstream os;
  os << "head\ttail\trelations";
  for (auto t : {PredicateSupertype::kGeometric, PredicateSupertype::kPossessive,
                 PredicateSupertype::kSemantic, PredicateSupertype::kMisc}) {
    os << '\t' << to_string(t);
  }
  os << '\n';
  for (const auto& h : m.entity_supertypes) {
    for (const auto& t : m.entity_supertypes) {
      auto cell = m.cell(h, t);
      Count total = 0;
      if (auto it = m.counts.find({h, t}); it != m.counts.end()) {
        for (Count c : it->second) total += c;
      }
      os << h << '\t' << t << '\t' << total;
      for (std::size_t i = 0; i < kNumPredicateSupertypes; ++i) {
        os << '\t' << (cell ? num((*cell)[i]) : "empty");
      }
      os << '\n';
    }
  }
  return os.str();
}

std::string guess_curves_text(const Dataset& train, const Dataset& eval,
                              int max_k, bool pretty) {
  std::ostringstream os;
  std::vector<GuessCurve> curves;
  for (const auto& [target, cond] : standard_guess_curves()) {
    curves.push_back(guess_curve(train, eval, target, cond, max_k));
  }
  if (pretty) {
    char buf[64];
    os << "top-k guess accuracy over relation instances\n";
    os << "curve            ";
    for (int k = 1; k <= max_k; ++k) {
      std::snprintf(buf, sizeof buf, "%7s", ("k=" + std::to_string(k)).c_str());
      os << buf;
    }
    os << '\n';
    for (const auto& c : curves) {
      std::snprintf(buf, sizeof buf, "%-17s", curve_name(c.target, c.conditioning).c_str());
      os << buf;
      for (const auto& [k, f] : c.accuracy_at_k) {
        std::snprintf(buf, sizeof buf, "%7.3f", f);
        os << buf;
      }
      os << '\n';
    }
    return os.str();
  }
  os << "# unit=relation_instances\n";
  os << "curve,k,fraction\n";
  for (const auto& c : curves) {
    for (const auto& [k, f] : c.accuracy_at_k) {
      os << '"' << curve_name(c.target, c.conditioning) << "\"," << k << ','
         << num(f) << '\n';
    }
  }
  return os.str();
}

int run_stats(const StatsArgs& a, std::ostream& out) {
  const Dataset all = load(a.data);
  const Dataset train = select(all, a.split);
  const Dataset eval = select(all, a.eval_split.empty() ? a.split : a.eval_split);

  std::vector<std::pair<std::string, std::string>> files;
  if (!a.supertypes.empty()) {
    const SupertypeMap map = load_supertype_map(a.supertypes);
    files.emplace_back("type_distribution.tsv",
                       type_distribution_text(type_distribution(train, map), a.pretty));
    files.emplace_back("edge_type_matrix.tsv",
                       edge_matrix_text(edge_type_matrix(train, map)));
  }
  files.emplace_back(a.pretty ? "guess_curves.txt" : "guess_curves.csv",
                     guess_curves_text(train, eval, a.max_k, a.pretty));
  const OverlapCeiling ceiling = overlap_recall_ceiling(train);
  files.emplace_back("overlap_ceiling.tsv",
                     "overlapping\ttotal\tfraction\n" +
                         std::to_string(ceiling.overlapping) + '\t' +
                         std::to_string(ceiling.total) + '\t' +
                         num(ceiling.fraction()) + '\n');

  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    for (const auto& [name, text] : files) write_file(fs::path(a.out_dir) / name, text);
    return kOk;
  }
  for (const auto& [name, text] : files) out << "## " << name << '\n' << text;
  return kOk;
}

// ---------------------------------------------------------------- mine

struct MineArgs {
  DataArgs data;
  std::string split = "train";
  Count min_count = 50;
  double min_lift = 10.0;
  std::string out;
  bool pretty = false;
};

int run_mine(const MineArgs& a, std::ostream& out) {
  const Dataset ds = select(load(a.data), a.split);
  const MotifLexicon lex = mine_motifs(ds, {a.min_count, a.min_lift});
  save_motif_lexicon(lex, a.out);
  const auto coverage = motif_coverage(ds, lex);
  if (a.pretty) {
    out << lex.motifs.size() << " motifs mined from " << ds.graphs.size()
        << " images\n";
    for (std::size_t i = 0; i < lex.motifs.size(); ++i) {
      const auto& m = lex.motifs[i];
      char buf[96];
      std::snprintf(buf, sizeof buf, "%4zu  round %zu  len %2zu  lift %8.2f  n=%lld  ",
                    i, m.round, m.length, m.lift, static_cast<long long>(m.joint_count));
      out << buf << lex.plate_notation(MotifElement::motif(i)) << '\n';
    }
    out << "coverage (images with a motif of length >= L)\n";
    for (const auto& row : coverage) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "  L=%-3zu %6.1f%%\n", row.min_length,
                    100 * row.fraction);
      out << buf;
    }
    return kOk;
  }
  out << "motif\tround\tlength\tlift\tjoint_count\tplate\n";
  for (std::size_t i = 0; i < lex.motifs.size(); ++i) {
    const auto& m = lex.motifs[i];
    out << i << '\t' << m.round << '\t' << m.length << '\t' << num(m.lift) << '\t'
        << m.joint_count << '\t' << lex.plate_notation(MotifElement::motif(i)) << '\n';
  }
  out << "min_length\tcoverage\n";
  for (const auto& row : coverage) {
    out << row.min_length << '\t' << num(row.fraction) << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- build-freq

struct BuildArgs {
  DataArgs data;
  std::string split = "train";
  std::string out;
};

int run_build(const BuildArgs& a, std::ostream& out) {
  const Dataset ds = select(load(a.data), a.split);
  const FrequencyTable table = build_frequency_table(ds.graphs, ds.vocab);
  save_frequency_table(table, a.out);
  out << "pairs\t" << table.counts().size() << "\nimages\t" << ds.graphs.size()
      << '\n';
  return kOk;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  DataArgs data;
  std::string split = "test";
  std::string mode;
  std::string freq;
  std::string detections;
  std::string roi_order;
  bool overlap = false;
  bool no_constraints = false;
  bool no_entity_scores = false;
  bool renormalize_bg = false;
  std::size_t k_max = 100;
  double nms_iou = kDefaultNmsIou;
  std::string out;
};

int run_predict(const PredictArgs& a, std::ostream& out) {
  auto mode = parse_mode(a.mode);
  if (!mode || (*mode != Mode::kPredCls && *mode != Mode::kSGCls &&
                *mode != Mode::kSGDet)) {
    throw std::invalid_argument("predict supports --mode predcls|sgcls|sgdet");
  }
  std::optional<RoiOrder> order;
  if (!a.roi_order.empty()) {
    order = parse_roi_order(a.roi_order);
    if (!order) throw std::invalid_argument("unknown --roi-order '" + a.roi_order + "'");
  }
  const Dataset all = load(a.data);
  const Dataset ds = select(all, a.split);
  const FrequencyTable table = load_frequency_table(a.freq);
  if (!(table.vocab() == ds.vocab)) {
    throw SchemaError("frequency table vocabulary differs from the corpus",
                      a.freq);
  }
  std::map<std::string, DetectionSet> detections;
  if (*mode != Mode::kPredCls) {
    if (a.detections.empty()) {
      throw std::invalid_argument("--detections is required for sgcls/sgdet");
    }
    detections = load_detections(a.detections, ds.vocab);
    for (const auto& [id, _] : detections) {
      if (!all.find(id)) {
        throw SchemaError("detections for unknown image '" + id + "'",
                          a.detections);
      }
    }
  }

  PredictOptions opt;
  opt.use_overlap = a.overlap;
  opt.use_constraints = !a.no_constraints;
  opt.k_max = a.k_max;
  opt.nms_iou = a.nms_iou;
  opt.use_entity_scores = !a.no_entity_scores;
  opt.renormalize_without_bg = a.renormalize_bg;

  std::vector<std::string> lines(ds.graphs.size());
  parallel_for(ds.graphs.size(), a.data.jobs, [&](std::size_t i) {
    const SceneGraph& g = ds.graphs[i];
    PredictInput input;
    if (*mode == Mode::kPredCls) {
      input = LabeledBoxes{g.boxes, g.labels};
    } else {
      auto it = detections.find(g.image_id);
      DetectionSet det = it == detections.end() ? DetectionSet{g.image_id, {}}
                                                : it->second;
      if (*mode == Mode::kSGCls) {
        if (det.proposals.size() != g.boxes.size()) {
          throw SchemaError("sgcls detections for '" + g.image_id +
                                "' must score exactly the ground-truth boxes",
                            a.detections);
        }
        ScoredBoxes sb;
        for (std::size_t b = 0; b < g.boxes.size(); ++b) {
          if (!(det.proposals[b].box == g.boxes[b])) {
            throw SchemaError("sgcls box " + std::to_string(b) + " of '" +
                                  g.image_id + "' differs from ground truth",
                              a.detections);
          }
          sb.boxes.push_back(g.boxes[b]);
          sb.class_scores.push_back(det.proposals[b].class_scores);
        }
        input = std::move(sb);
      } else {
        if (order) {
          const auto perm = order_rois(det, *order, a.data.seed);
          DetectionSet reordered{det.image_id, {}};
          for (std::size_t p : perm) reordered.proposals.push_back(det.proposals[p]);
          det = std::move(reordered);
        }
        input = std::move(det);
      }
    }
    PredictedGraph pg = predict(*mode, input, table, opt);
    pg.image_id = g.image_id;
    lines[i] = format_prediction_line(pg, ds.vocab) + '\n';
  });
  std::string text;
  for (const auto& l : lines) text += l;
  emit(a.out, text, out);
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  DataArgs data;
  std::string split = "test";
  std::vector<std::string> modes;
  std::vector<std::string> predictions;
  std::vector<int> ks = {20, 50, 100};
  double iou = kDefaultMatchIou;
  bool no_constraints = false;
  bool per_image = false;
  bool pretty = false;
  std::string out;
};

int run_eval(const EvalArgs& a, std::ostream& out) {
  if (a.modes.size() != a.predictions.size()) {
    throw std::invalid_argument("--mode and --predictions need the same number of entries");
  }
  const Dataset ds = select(load(a.data), a.split);
  std::vector<ModeReport> modes;
  for (std::size_t i = 0; i < a.modes.size(); ++i) {
    auto mode = parse_mode(a.modes[i]);
    if (!mode) throw std::invalid_argument("unknown mode '" + a.modes[i] + "'");
    EvalConfig cfg;
    cfg.mode = *mode;
    cfg.ks = a.ks;
    cfg.iou_threshold = a.iou;
    cfg.graph_constraints = !a.no_constraints;
    cfg.validate();
    const auto preds = load_predictions(a.predictions[i], ds.vocab);
    for (const auto& [id, _] : preds) {
      if (!ds.find(id)) {
        throw SchemaError("prediction for image '" + id + "' outside the evaluated split",
                          a.predictions[i]);
      }
    }
    try {
      modes.push_back(evaluate_corpus(preds, ds, cfg, a.data.jobs));
    } catch (const std::invalid_argument& e) {
      throw SchemaError(e.what(), a.predictions[i]);
    }
  }
  const EvalReport report = make_report(std::move(modes));
  if (a.pretty) {
    emit(a.out, report_to_table(report), out);
  } else {
    emit(a.out, report_to_json(report, a.per_image), out);
  }
  return kOk;
}

// ---------------------------------------------------------------- validate

struct ValidateArgs {
  std::string corpus;
  std::string vocab;
  std::string splits;
  std::string detections;
  std::string predictions;
};

int run_validate(const ValidateArgs& a, std::ostream& out, std::ostream& err) {
  const Vocab vocab = load_vocab(a.vocab);
  std::size_t problems = 0;
  std::size_t graphs = 0;
  auto scan = [&](const std::string& path, auto&& parse) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open file", path);
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
      ++line;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        parse(text, path, line);
      } catch (const SchemaError& e) {
        err << e.what() << '\n';
        ++problems;
      }
    }
  };
  scan(a.corpus, [&](const std::string& t, const std::string& f, std::size_t l) {
    parse_graph_line(t, vocab, f, l);
    ++graphs;
  });
  if (problems == 0) {
    try {
      load_dataset(a.corpus, a.vocab, a.splits);
    } catch (const SchemaError& e) {
      err << e.what() << '\n';
      ++problems;
    }
  }
  if (!a.detections.empty()) {
    scan(a.detections, [&](const std::string& t, const std::string& f, std::size_t l) {
      parse_detection_line(t, vocab, f, l);
    });
  }
  if (!a.predictions.empty()) {
    scan(a.predictions, [&](const std::string& t, const std::string& f, std::size_t l) {
      parse_prediction_line(t, vocab, f, l);
    });
  }
  if (problems > 0) {
    err << problems << " problem(s) found\n";
    return kSchema;
  }
  out << "ok\t" << graphs << " graphs\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Scene-graph corpus statistics, motif mining, frequency baselines "
               "and recall@K evaluation."};
  app.name("scenestat");
  app.require_subcommand(1);

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "structural statistics of a corpus");
  add_data_options(stats_cmd, stats.data);
  stats_cmd->add_option("--split", stats.split, "split to analyse (train|dev|test|all)")
      ->capture_default_str();
  stats_cmd->add_option("--eval-split", stats.eval_split,
                        "split whose relations are guessed (defaults to --split)");
  stats_cmd->add_option("--supertypes", stats.supertypes,
                        "supertype map JSON; enables type tables");
  stats_cmd->add_option("--max-k", stats.max_k, "largest k of the guess curves")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  stats_cmd->add_option("--out-dir", stats.out_dir, "write one file per table here");
  stats_cmd->add_flag("--pretty", stats.pretty, "human-readable tables");

  MineArgs mine;
  auto* mine_cmd = app.add_subcommand("mine", "mine PMI motifs into a lexicon");
  add_data_options(mine_cmd, mine.data);
  mine_cmd->add_option("--split", mine.split, "split to mine")->capture_default_str();
  mine_cmd->add_option("--min-count", mine.min_count,
                       "minimum images containing each constituent")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  mine_cmd->add_option("--min-lift", mine.min_lift,
                       "minimum P(a,b) / (P(a) P(b))")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  mine_cmd->add_option("--out", mine.out, "lexicon JSON output")->required();
  mine_cmd->add_flag("--pretty", mine.pretty, "plate-notation listing");

  BuildArgs build;
  auto* build_cmd = app.add_subcommand("build-freq", "build the frequency table");
  add_data_options(build_cmd, build.data);
  build_cmd->add_option("--split", build.split, "split to count")->capture_default_str();
  build_cmd->add_option("--out", build.out, "frequency table JSON output")->required();

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "run the Freq / Freq-Overlap predictor");
  add_data_options(pred_cmd, pred.data);
  pred_cmd->add_option("--split", pred.split, "split to predict")->capture_default_str();
  pred_cmd->add_option("--mode", pred.mode, "predcls|sgcls|sgdet")->required();
  pred_cmd->add_option("--freq", pred.freq, "frequency table from build-freq")->required();
  pred_cmd->add_option("--detections", pred.detections,
                       "detections.jsonl (sgcls: scores for the ground-truth boxes)");
  pred_cmd->add_flag("--overlap", pred.overlap, "drop pairs whose boxes do not overlap");
  pred_cmd->add_flag("--no-constraints", pred.no_constraints,
                     "emit every non-BG predicate per pair");
  pred_cmd->add_flag("--no-entity-scores", pred.no_entity_scores,
                     "rank by predicate probability alone");
  pred_cmd->add_flag("--renormalize-bg", pred.renormalize_bg,
                     "rescale predicate probabilities to exclude BG mass");
  pred_cmd->add_option("--k-max", pred.k_max, "triplets kept per image")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  pred_cmd->add_option("--nms-iou", pred.nms_iou, "per-class NMS IoU threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  pred_cmd->add_option("--roi-order", pred.roi_order,
                       "reorder sgdet proposals: leftright|confidence|size|random");
  pred_cmd->add_option("--out", pred.out, "predictions.jsonl (stdout when omitted)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "recall@K evaluation");
  add_data_options(eval_cmd, ev.data);
  eval_cmd->add_option("--split", ev.split, "split to evaluate")->capture_default_str();
  eval_cmd->add_option("--mode", ev.modes,
                       "predcls,sgcls,sgdet,phrdet,preddet (one per predictions file)")
      ->required()
      ->delimiter(',');
  eval_cmd->add_option("--predictions", ev.predictions, "predictions.jsonl per mode")
      ->required()
      ->delimiter(',');
  eval_cmd->add_option("--k", ev.ks, "K values")->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--iou", ev.iou, "box match IoU threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  eval_cmd->add_flag("--no-constraints", ev.no_constraints,
                     "allow several predicates per pair");
  eval_cmd->add_flag("--per-image", ev.per_image, "include per-image recall");
  eval_cmd->add_flag("--pretty", ev.pretty, "fixed-width results table");
  eval_cmd->add_option("--out", ev.out, "report output (stdout when omitted)");

  ValidateArgs val;
  auto* val_cmd = app.add_subcommand("validate", "check input files against their schemas");
  val_cmd->add_option("--corpus", val.corpus, "graphs.jsonl")->required();
  val_cmd->add_option("--vocab", val.vocab, "vocab.json")->required();
  val_cmd->add_option("--splits", val.splits, "splits.json")->required();
  val_cmd->add_option("--detections", val.detections, "detections.jsonl");
  val_cmd->add_option("--predictions", val.predictions, "predictions.jsonl");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kUsage;
  }

  try {
    if (stats_cmd->parsed()) return run_stats(stats, out);
    if (mine_cmd->parsed()) return run_mine(mine, out);
    if (build_cmd->parsed()) return run_build(build, out);
    if (pred_cmd->parsed()) return run_predict(pred, out);
    if (eval_cmd->parsed()) return run_eval(ev, out);
    if (val_cmd->parsed()) return run_validate(val, out, err);
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return kSchema;
  } catch (const PersistError& e) {
    err << "artifact error: " << e.what() << '\n';
    return kSchema;
  } catch (const InvariantError& e) {
    err << "internal error: " << e.what() << '\n';
    return kInvariant;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace scenestat::cli
