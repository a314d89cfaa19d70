#include <random>

#include "doctest.h"
#include "json.hpp"
#include "scenestat/errors.hpp"
#include "scenestat/eval.hpp"
#include "testkit.hpp"

using namespace scenestat;
using testkit::obj;
using testkit::pred;

namespace {

EvalConfig config(Mode mode, std::vector<int> ks = {20, 50, 100}, bool constraints = true) {
  EvalConfig c;
  c.mode = mode;
  c.ks = std::move(ks);
  c.graph_constraints = constraints;
  return c;
}

const Box kHead(0, 0, 10, 10);
const Box kTail(0, 0, 100, 100);

SceneGraph single_edge() {
  return testkit::make_graph("g", {kHead, kTail}, {obj("man"), obj("street")},
                             {{0, 1, pred("on")}});
}

ScoredTriplet triplet(Box h, Box t, PredicateId p, double score,
                      ClassId hl = obj("man"), ClassId tl = obj("street")) {
  return {h, t, hl, tl, p, score};
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(config(Mode::kSGDet).validate());
  CHECK_THROWS_AS(config(Mode::kSGDet, {}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(config(Mode::kSGDet, {50, 20}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(config(Mode::kSGDet, {0, 20}).validate(), std::invalid_argument);
  EvalConfig c = config(Mode::kSGDet);
  c.iou_threshold = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.iou_threshold = 1.0;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("exact prediction matches its edge") {
  const SceneGraph gt = single_edge();
  const std::vector<ScoredTriplet> p = {triplet(kHead, kTail, pred("on"), 0.5)};
  for (Mode m : {Mode::kPredCls, Mode::kSGCls, Mode::kSGDet, Mode::kPhrDet}) {
    const MatchResult r = match_triplets(p, gt, config(m));
    CHECK(r.matched_by[0] == std::size_t{0});
  }
  // Wrong label or predicate never matches.
  const std::vector<ScoredTriplet> wrong = {triplet(kHead, kTail, pred("near"), 0.5),
                                            triplet(kHead, kTail, pred("on"), 0.4, obj("tree"))};
  CHECK_FALSE(match_triplets(wrong, gt, config(Mode::kPhrDet, {20}, false)).matched_by[0]);
}

TEST_CASE("low head overlap fails per-box matching but passes on the union box") {
  const SceneGraph gt = single_edge();
  const double s = 30.0 / 7.0;
  const Box head(s, 0, 10 + s, 10);
  CHECK(iou(head, kHead) == doctest::Approx(0.4));
  const std::vector<ScoredTriplet> p = {triplet(head, kTail, pred("on"), 0.9)};
  CHECK_FALSE(match_triplets(p, gt, config(Mode::kSGDet)).matched_by[0]);
  CHECK(iou(union_box(head, kTail), union_box(kHead, kTail)) >= 0.5);
  CHECK(match_triplets(p, gt, config(Mode::kPhrDet)).matched_by[0] == std::size_t{0});
  // A shifted box is not the ground-truth box in the classification modes.
  CHECK_FALSE(match_triplets(p, gt, config(Mode::kPredCls)).matched_by[0]);
}

TEST_CASE("each ground-truth edge is consumed once") {
  const SceneGraph gt = single_edge();
  const std::vector<ScoredTriplet> p = {triplet(kHead, kTail, pred("on"), 0.9),
                                        triplet(Box(0, 0, 10, 11), kTail, pred("on"), 0.8)};
  const MatchResult r = match_triplets(p, gt, config(Mode::kSGDet, {20}, false));
  CHECK(r.matched_by[0] == std::size_t{0});
  CHECK(r.matched_within(20) == 1);
}

TEST_CASE("graph constraints keep the best prediction per box pair") {
  const SceneGraph gt = single_edge();
  const std::vector<ScoredTriplet> p = {triplet(kHead, kTail, pred("near"), 0.9),
                                        triplet(kHead, kTail, pred("on"), 0.8)};
  CHECK(apply_graph_constraints(p).size() == 1);
  CHECK_FALSE(match_triplets(p, gt, config(Mode::kPredCls)).matched_by[0]);
  CHECK(match_triplets(p, gt, config(Mode::kPredCls, {20}, false)).matched_by[0] == std::size_t{1});
}

TEST_CASE("constraints can raise recall at a fixed k") {
  // Dropping the second prediction for pair P lets pair Q into the top two.
  const Box q(200, 0, 210, 10);
  const SceneGraph gt = testkit::make_graph("g", {kHead, kTail, q}, {obj("man"), obj("street"), obj("man")},
                                            {{2, 1, pred("on")}});
  const std::vector<ScoredTriplet> p = {triplet(kHead, kTail, pred("near"), 0.9),
                                        triplet(kHead, kTail, pred("in"), 0.8),
                                        triplet(q, kTail, pred("on"), 0.7)};
  CHECK(recall_at_k(p, gt, config(Mode::kPredCls, {2}, true))->at(2) == 1.0);
  CHECK(recall_at_k(p, gt, config(Mode::kPredCls, {2}, false))->at(2) == 0.0);
  CHECK(recall_at_k(p, gt, config(Mode::kPredCls, {3}, false))->at(3) == 1.0);
}

TEST_CASE("unsorted predictions are rejected") {
  const SceneGraph gt = single_edge();
  const std::vector<ScoredTriplet> p = {triplet(kHead, kTail, pred("on"), 0.1),
                                        triplet(kHead, kTail, pred("near"), 0.2)};
  CHECK_THROWS_AS(match_triplets(p, gt, config(Mode::kPredCls)), std::invalid_argument);
}

TEST_CASE("recall at k") {
  // Ten edges on distinct box pairs.
  std::vector<Box> boxes;
  std::vector<ClassId> labels;
  std::vector<Relation> rels;
  for (std::size_t i = 0; i < 11; ++i) {
    boxes.push_back(testkit::grid_box(i));
    labels.push_back(obj("man"));
  }
  for (std::size_t i = 0; i < 10; ++i) rels.push_back({i, i + 1, pred("near")});
  const SceneGraph gt = testkit::make_graph("g", boxes, labels, rels);

  const auto oracle = testkit::oracle_predictions(gt);
  const auto all = recall_at_k(oracle, gt, config(Mode::kPredCls));
  REQUIRE(all);
  CHECK(all->at(20) == 1.0);

  // 43 misses, then 7 hits within the top 50 and the rest after.
  std::vector<ScoredTriplet> p;
  double score = 1000;
  for (int i = 0; i < 43; ++i) {
    p.push_back({boxes[0], boxes[1], obj("man"), obj("man"), pred("wearing"), score--});
  }
  for (std::size_t i = 0; i < 10; ++i) {
    p.push_back({boxes[i], boxes[i + 1], obj("man"), obj("man"), pred("near"), score--});
  }
  const auto r = recall_at_k(p, gt, config(Mode::kPredCls, {20, 50, 100}, false));
  REQUIRE(r);
  CHECK(r->at(20) == 0.0);
  CHECK(r->at(50) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(r->at(100) == 1.0);

  const auto none = recall_at_k({}, gt, config(Mode::kPredCls));
  REQUIRE(none);
  for (const auto& [k, v] : *none) CHECK(v == 0.0);

  const SceneGraph empty = testkit::make_graph("e", {kHead}, {obj("man")}, {});
  CHECK_FALSE(recall_at_k(oracle, empty, config(Mode::kPredCls)).has_value());
}

TEST_CASE("greedy matching can fall short of the optimum and the gap is measurable") {
  // Prediction 0 fits both edges; greedy gives it the first, leaving
  // prediction 1 (which only fits the first) unmatched.
  const Box a(0, 0, 10, 10), b(40, 0, 50, 10), c(4, 0, 14, 10);
  const SceneGraph gt = testkit::make_graph("g", {a, b, c}, {obj("man"), obj("street"), obj("man")},
                                            {{0, 1, pred("on")}, {2, 1, pred("on")}});
  const std::vector<ScoredTriplet> p = {triplet(Box(2, 0, 12, 10), b, pred("on"), 0.9),
                                        triplet(a, b, pred("on"), 0.8)};
  const EvalConfig cfg = config(Mode::kSGDet, {1, 2}, false);
  const MatchResult greedy = match_triplets(p, gt, cfg);
  CHECK(greedy.matched_within(2) == 1);
  CHECK(max_matching_size(p, gt, cfg, 2) == 2);
  CHECK(testkit::oracle_max_matching(p, gt, Mode::kSGDet, 0.5) == 2);

  Dataset ds = testkit::make_dataset({gt}, Split::kTest);
  PredictedGraph pg;
  pg.image_id = "g";
  pg.entities = {{p[0].head_box, obj("man"), 1}, {b, obj("street"), 1}, {a, obj("man"), 1}};
  pg.triplets = {{0, 1, pred("on"), 0.9}, {2, 1, pred("on"), 0.8}};
  const ModeReport rep = evaluate_corpus({{"g", pg}}, ds, cfg);
  CHECK(rep.images_with_discrepancy == 1);
  CHECK(rep.images[0].greedy_below_optimal == std::vector<int>{2});
}

TEST_CASE("preddet ranks predicates within each ground-truth pair") {
  const SceneGraph gt = single_edge();
  const std::size_t np = testkit::toy_vocab().num_predicates();
  std::vector<double> scores(np, 0.0);
  scores[static_cast<std::size_t>(pred("on"))] = 0.9;
  const std::vector<PairScores> det = {{0, 1, scores}};
  CHECK(evaluate_preddet(det, gt, {1})->at(1) == 1.0);

  const std::vector<PairScores> uniform = {{0, 1, std::vector<double>(np, 0.2)}};
  const auto u = evaluate_preddet(uniform, gt, {1, static_cast<int>(np) - 1});
  CHECK(u->at(static_cast<int>(np) - 1) == 1.0);

  const std::vector<PairScores> stray = {{1, 0, scores}};
  CHECK_THROWS_AS(evaluate_preddet(stray, gt, {1}), std::invalid_argument);

  // Two predicates on one pair: only the top one counts under constraints.
  const SceneGraph two = testkit::make_graph("g", {kHead, kTail}, {obj("man"), obj("street")},
                                             {{0, 1, pred("on")}, {0, 1, pred("near")}});
  std::vector<double> s2(np, 0.0);
  s2[static_cast<std::size_t>(pred("on"))] = 0.6;
  s2[static_cast<std::size_t>(pred("near"))] = 0.3;
  const std::vector<PairScores> p2 = {{0, 1, s2}};
  CHECK(evaluate_preddet(p2, two, {2}, false)->at(2) == 1.0);
  CHECK(evaluate_preddet(p2, two, {2}, true)->at(2) == 0.5);
}

TEST_CASE("preddet on a 70/30 corpus recovers the majority share") {
  const Dataset ds = testkit::mixed_predicate_corpus(70, 30);
  const FrequencyTable table = build_frequency_table(ds.graphs, ds.vocab);
  std::map<std::string, PredictedGraph> preds;
  PredictOptions opt;
  opt.use_constraints = false;
  for (const auto& g : ds.graphs) {
    PredictedGraph pg = predict(Mode::kPredCls, LabeledBoxes{g.boxes, g.labels}, table, opt);
    pg.image_id = g.image_id;
    preds[g.image_id] = pg;
  }
  const ModeReport r = evaluate_corpus(preds, ds, config(Mode::kPredDet, {1, 2}, false));
  CHECK(r.recall.at(1) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(r.recall.at(2) == 1.0);
}

TEST_CASE("corpus evaluation") {
  std::mt19937_64 rng(8);
  std::vector<SceneGraph> graphs;
  for (int i = 0; i < 12; ++i) {
    graphs.push_back(testkit::random_graph(rng, "i" + std::to_string(i), {.max_entities = 5}));
  }
  graphs.push_back(testkit::make_graph("edgeless", {kHead}, {obj("man")}, {}));
  const Dataset ds = testkit::make_dataset(graphs, Split::kTest);

  std::map<std::string, PredictedGraph> oracle;
  for (const auto& g : ds.graphs) {
    PredictedGraph pg;
    pg.image_id = g.image_id;
    for (std::size_t e = 0; e < g.boxes.size(); ++e) pg.entities.push_back({g.boxes[e], g.labels[e], 1});
    double s = 1;
    for (const auto& r : g.relations) {
      pg.triplets.push_back({r.head, r.tail, r.predicate, s});
      s *= 0.99;
    }
    oracle[g.image_id] = pg;
  }
  std::size_t max_edges = 0;
  for (const auto& g : ds.graphs) max_edges = std::max(max_edges, g.relations.size());
  const int k = static_cast<int>(std::max<std::size_t>(max_edges, 1));
  const ModeReport full = evaluate_corpus(oracle, ds, config(Mode::kPredCls, {k}, false));
  CHECK(full.recall.at(k) == 1.0);
  std::size_t with_edges = 0;
  for (const auto& g : ds.graphs) with_edges += !g.relations.empty();
  CHECK(full.images_scored == with_edges);
  CHECK_FALSE(full.images.back().recall.has_value());

  const ModeReport nothing = evaluate_corpus(std::map<std::string, PredictedGraph>{}, ds, config(Mode::kPredCls));
  for (const auto& [kk, v] : nothing.recall) CHECK(v == 0.0);

  std::map<std::string, PredictedGraph> stray = {{"nope", PredictedGraph{}}};
  CHECK_THROWS_AS(evaluate_corpus(stray, ds, config(Mode::kPredCls)), SchemaError);

  // Parallel evaluation gives the same report.
  const ModeReport par = evaluate_corpus(oracle, ds, config(Mode::kPredCls, {k}, false), 4);
  CHECK(par.recall == full.recall);
}

TEST_CASE("recall properties over random fixtures") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const SceneGraph gt = testkit::random_graph(rng, "g", {.max_entities = 5, .num_labels = 3});
    for (Mode mode : {Mode::kPredCls, Mode::kSGDet, Mode::kPhrDet}) {
      const bool exact = mode == Mode::kPredCls;
      const auto preds = testkit::random_predictions(gt, rng, 1 + testkit::below(rng, 12), exact, 3, 3);
      const std::vector<int> ks = {1, 2, 5, 8, 20};
      const auto with = recall_at_k(preds, gt, config(mode, ks, true));
      const auto without = recall_at_k(preds, gt, config(mode, ks, false));
      if (gt.relations.empty()) {
        CHECK_FALSE(with.has_value());
        continue;
      }
      double prev = 0;
      for (int k : ks) {
        CHECK(with->at(k) >= prev);
        prev = with->at(k);
      }
      // Over the whole list the constrained predictions are a subset.
      const std::size_t all = preds.size();
      CHECK(max_matching_size(preds, gt, config(mode, ks, true), all) <=
            max_matching_size(preds, gt, config(mode, ks, false), all));
      if (mode == Mode::kPredCls) CHECK(with->at(20) <= without->at(20));
      for (bool constraints : {true, false}) {
        const EvalConfig cfg = config(mode, ks, constraints);
        const auto usable = constraints ? testkit::oracle_constrain(preds) : preds;
        const MatchResult m = match_triplets(preds, gt, cfg);
        for (int k : ks) {
          const std::vector<ScoredTriplet> top(usable.begin(),
                                               usable.begin() + std::min<std::size_t>(usable.size(), static_cast<std::size_t>(k)));
          const std::size_t best = testkit::oracle_max_matching(top, gt, mode, 0.5);
          CHECK(m.matched_within(static_cast<std::size_t>(k)) <= best);
          CHECK(max_matching_size(preds, gt, cfg, static_cast<std::size_t>(k)) == best);
        }
      }
    }
  }
}

TEST_CASE("classification and detection modes degrade in order") {
  std::mt19937_64 rng(31);
  std::vector<SceneGraph> graphs;
  for (int i = 0; i < 43; ++i) {
    graphs.push_back(testkit::grid_graph(rng, "g" + std::to_string(i), 6, 4, 3, 0.3));
  }
  const Dataset ds = testkit::make_dataset(graphs, Split::kTest);
  const FrequencyTable table = build_frequency_table(ds.graphs, ds.vocab);
  const std::size_t nc = ds.vocab.num_objects();
  PredictOptions opt;
  opt.k_max = 10000;
  std::map<std::string, PredictedGraph> predcls, sgcls, sgdet;
  for (const auto& g : ds.graphs) {
    ScoredBoxes sb{g.boxes, {}};
    DetectionSet det{g.image_id, {}};
    for (std::size_t e = 0; e < g.boxes.size(); ++e) {
      std::vector<double> s(nc);
      double sum = 0;
      for (double& x : s) sum += (x = testkit::uniform(rng, 0.0, 0.2));
      s[static_cast<std::size_t>(g.labels[e])] += testkit::uniform(rng, 0.0, 1.0);
      sum = 0;
      for (double x : s) sum += x;
      for (double& x : s) x /= sum;
      sb.class_scores.push_back(s);
      det.proposals.push_back({testkit::jitter(g.boxes[e], rng, 0.35), s});
    }
    predcls[g.image_id] = predict(Mode::kPredCls, LabeledBoxes{g.boxes, g.labels}, table, opt);
    sgcls[g.image_id] = predict(Mode::kSGCls, sb, table, opt);
    sgdet[g.image_id] = predict(Mode::kSGDet, det, table, opt);
    for (auto* m : {&predcls, &sgcls, &sgdet}) (*m)[g.image_id].image_id = g.image_id;
  }
  const std::vector<int> ks = {10000};
  const double r_pc = evaluate_corpus(predcls, ds, config(Mode::kPredCls, ks)).recall.at(10000);
  const double r_sc = evaluate_corpus(sgcls, ds, config(Mode::kSGCls, ks)).recall.at(10000);
  const double r_sd = evaluate_corpus(sgdet, ds, config(Mode::kSGDet, ks)).recall.at(10000);
  CHECK(r_pc >= r_sc);
  CHECK(r_sc >= r_sd);
  CHECK(r_pc > r_sd);
}

TEST_CASE("mean recall averages three modes at 50 and 100") {
  auto mode = [](Mode m, double r50, double r100) {
    ModeReport r;
    r.config = config(m);
    r.recall = {{20, 0.0}, {50, r50}, {100, r100}};
    return r;
  };
  // A published-style row: 23.5/27.6, 32.4/34.0, 59.9/64.1 averages to 40.25.
  const std::vector<ModeReport> row = {mode(Mode::kSGDet, 0.235, 0.276),
                                       mode(Mode::kSGCls, 0.324, 0.340),
                                       mode(Mode::kPredCls, 0.599, 0.641)};
  const auto mean = mean_recall(row);
  REQUIRE(mean);
  CHECK(std::abs(*mean - 0.4025) < 1e-12);
  CHECK_FALSE(mean_recall({row[0], row[1]}).has_value());

  const EvalReport rep = make_report(row);
  const std::string table = report_to_table(rep);
  CHECK(table.find("Mean") != std::string::npos);
  CHECK(table.find("40.2") != std::string::npos);
  const auto j = nlohmann::json::parse(report_to_json(rep, true));
  CHECK(j["mean"].get<double>() == doctest::Approx(0.4025));
  CHECK(j["modes"].size() == 3);
  CHECK(j["metadata"]["matching"] == kMatchingRule);
  CHECK(j["modes"][0].contains("per_image"));
}

TEST_CASE("prediction lines round-trip and reject background") {
  const Vocab v = testkit::toy_vocab();
  PredictedGraph g;
  g.image_id = "x";
  g.entities = {{Box(0, 0, 1, 1), obj("man"), 0.5}, {Box(1, 1, 2, 2), obj("shirt"), 0.25}};
  g.triplets = {{0, 1, pred("wearing"), 0.125}};
  const PredictedGraph back = parse_prediction_line(format_prediction_line(g, v), v);
  CHECK(back.image_id == "x");
  REQUIRE(back.entities.size() == 2);
  CHECK(back.entities[1].score == 0.25);
  REQUIRE(back.triplets.size() == 1);
  CHECK(back.triplets[0].predicate == pred("wearing"));
  CHECK(format_prediction_line(back, v) == format_prediction_line(g, v));

  CHECK_THROWS_AS(parse_prediction_line(
                      R"({"image_id": "x", "boxes": [[0,0,1,1],[1,1,2,2]], "labels": ["man","man"], "scores": [1,1], "relations": [[0,1,"bg",0.5]]})", v),
                  SchemaError);
  CHECK_THROWS_AS(parse_prediction_line(
                      R"({"image_id": "x", "boxes": [[0,0,1,1]], "labels": ["man"], "scores": [1], "relations": [[0,0,"on",0.5]]})", v),
                  SchemaError);
}
