#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "scenestat/cli.hpp"
#include "scenestat/eval.hpp"
#include "scenestat/persist.hpp"
#include "testkit.hpp"

using namespace scenestat;
using nlohmann::json;
namespace fs = std::filesystem;
using Args = std::vector<std::string>;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "scenestat");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> data_args(const fs::path& dir, const std::string& jobs = "1") {
  return {"--corpus", (dir / "graphs.jsonl").string(), "--vocab", (dir / "vocab.json").string(),
          "--splits", (dir / "splits.json").string(), "--jobs", jobs};
}

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs the whole pipeline on the fixture corpus, writing into `out`.
void pipeline(const fs::path& out, const std::string& jobs) {
  const fs::path fx = testkit::fixture_dir();
  const auto data = data_args(fx, jobs);
  REQUIRE(run(Args{"stats"} + data + Args{"--supertypes", (fx / "supertypes.json").string(),
                                                         "--out-dir", (out / "stats").string()})
              .code == 0);
  REQUIRE(run(Args{"mine"} + data + Args{"--min-count", "5", "--min-lift", "2",
                                                        "--out", (out / "lexicon.json").string()})
              .code == 0);
  REQUIRE(run(Args{"build-freq"} + data + Args{"--out", (out / "freq.json").string()})
              .code == 0);
  for (const std::string mode : {"predcls", "sgcls", "sgdet"}) {
    std::vector<std::string> args = {"--mode", mode, "--freq", (out / "freq.json").string(),
                                     "--out", (out / (mode + ".jsonl")).string()};
    if (mode != "predcls") {
      args.push_back("--detections");
      args.push_back((fx / ("detections_" + mode + ".jsonl")).string());
    }
    REQUIRE(run(Args{"predict"} + data + args).code == 0);
  }
  const std::string preds = (out / "predcls.jsonl").string() + "," + (out / "sgcls.jsonl").string() +
                            "," + (out / "sgdet.jsonl").string();
  REQUIRE(run(Args{"eval"} + data + Args{"--mode", "predcls,sgcls,sgdet", "--predictions",
                                                        preds, "--out", (out / "report.json").string()})
              .code == 0);
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run(Args{"--help"}).code == cli::kOk);
  CHECK(run({}).code == cli::kUsage);
  CHECK(run(Args{"stats", "--bogus"}).code == cli::kUsage);
  CHECK(run(Args{"frobnicate"}).code == cli::kUsage);
  const Run r = run(Args{"eval"} + data_args(testkit::fixture_dir()) +
                    Args{"--mode", "nonsense", "--predictions", "x"});
  CHECK(r.code == cli::kUsage);
}

TEST_CASE("schema errors exit with their own code and location") {
  const fs::path dir = testkit::scratch_dir("cli_schema");
  fs::copy_file(testkit::fixture_dir() / "vocab.json", dir / "vocab.json");
  fs::copy_file(testkit::fixture_dir() / "splits.json", dir / "splits.json");
  std::ofstream(dir / "graphs.jsonl") << "{\"image_id\": \"a\", \"boxes\": [[0,0,1]]}\n";
  const Run r = run(Args{"build-freq"} + data_args(dir) +
                    Args{"--out", (dir / "f.json").string()});
  CHECK(r.code == cli::kSchema);
  CHECK(r.err.find("graphs.jsonl:1") != std::string::npos);

  const Run v = run(Args{"validate", "--corpus", (dir / "graphs.jsonl").string(), "--vocab",
                     (dir / "vocab.json").string(), "--splits", (dir / "splits.json").string()});
  CHECK(v.code == cli::kSchema);
}

TEST_CASE("mining the elephant corpus through the tool") {
  const fs::path dir = testkit::scratch_dir("cli_elephant");
  testkit::write_corpus(testkit::elephant_corpus(), dir);
  const Run r = run(Args{"mine"} + data_args(dir) +
                    Args{"--out", (dir / "lex.json").string(), "--pretty"});
  REQUIRE(r.code == 0);
  const MotifLexicon lex = load_motif_lexicon(dir / "lex.json");
  REQUIRE(lex.motifs.size() == 1);
  CHECK(lex.motifs[0].lift == doctest::Approx(10.0));
  CHECK(r.out.find("elephant") != std::string::npos);
}

TEST_CASE("ground truth scored as predictions gives full recall") {
  const fs::path fx = testkit::fixture_dir();
  const fs::path dir = testkit::scratch_dir("cli_oracle");
  const Dataset ds = load_dataset(fx / "graphs.jsonl", fx / "vocab.json", fx / "splits.json");
  {
    std::ofstream out(dir / "oracle.jsonl");
    for (const auto& g : ds.graphs) {
      if (ds.splits.at(g.image_id) != Split::kTest) continue;
      PredictedGraph pg;
      pg.image_id = g.image_id;
      for (std::size_t e = 0; e < g.boxes.size(); ++e) pg.entities.push_back({g.boxes[e], g.labels[e], 1});
      double s = 1;
      for (const auto& rel : g.relations) {
        pg.triplets.push_back({rel.head, rel.tail, rel.predicate, s});
        s /= 2;
      }
      out << format_prediction_line(pg, ds.vocab) << "\n";
    }
  }
  const std::string p = (dir / "oracle.jsonl").string();
  const Run r = run(Args{"eval"} + data_args(fx) +
                    Args{"--mode", "predcls,sgdet,phrdet", "--no-constraints", "--predictions",
                                             p + "," + p + "," + p});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  REQUIRE(j["modes"].size() == 3);
  for (const auto& m : j["modes"]) {
    for (const auto& [k, v] : m["recall"].items()) CHECK(v.get<double>() == 1.0);
  }
}

TEST_CASE("pipeline output does not depend on the worker count") {
  const fs::path a = testkit::scratch_dir("cli_jobs1");
  const fs::path b = testkit::scratch_dir("cli_jobs4");
  pipeline(a, "1");
  pipeline(b, "4");
  for (const char* f : {"lexicon.json", "freq.json", "predcls.jsonl", "sgcls.jsonl", "sgdet.jsonl",
                        "report.json", "stats/type_distribution.tsv", "stats/guess_curves.csv",
                        "stats/edge_type_matrix.tsv", "stats/overlap_ceiling.tsv"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const json rep = json::parse(slurp(a / "report.json"));
  CHECK(rep["mean"].is_number());
}
