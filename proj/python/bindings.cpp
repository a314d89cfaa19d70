#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "scenestat/cli.hpp"
#include "scenestat/errors.hpp"
#include "scenestat/eval.hpp"
#include "scenestat/ingest.hpp"
#include "scenestat/motifs.hpp"
#include "scenestat/persist.hpp"
#include "scenestat/stats.hpp"

namespace py = pybind11;
using namespace scenestat;

namespace {

Mode mode_from(const std::string& name) {
  const auto m = parse_mode(name);
  if (!m) throw std::invalid_argument("unknown mode: " + name);
  return *m;
}

Split split_from(const std::string& name) {
  const auto s = parse_split(name);
  if (!s) throw std::invalid_argument("unknown split: " + name);
  return *s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Scene-graph corpus statistics, frequency baselines and recall@K evaluation";

  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<PersistError>(m, "PersistError", PyExc_ValueError);
  py::register_exception<InvariantError>(m, "InvariantError", PyExc_RuntimeError);

  py::class_<Box>(m, "Box")
      .def(py::init<double, double, double, double>(), py::arg("x1"), py::arg("y1"),
           py::arg("x2"), py::arg("y2"))
      .def_property_readonly("coords", &Box::coords)
      .def_property_readonly("area", &Box::area)
      .def("__eq__", [](const Box& a, const Box& b) { return a == b; })
      .def("__repr__", [](const Box& b) {
        std::ostringstream os;
        os << "Box(" << b.x1() << ", " << b.y1() << ", " << b.x2() << ", " << b.y2() << ")";
        return os.str();
      });
  m.def("iou", &iou);
  m.def("union_box", &union_box);
  m.def("boxes_overlap", &boxes_overlap);

  py::class_<Vocab>(m, "Vocab")
      .def_property_readonly("object_classes", &Vocab::object_classes)
      .def_property_readonly("predicates", &Vocab::predicates);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("vocab", &Dataset::vocab)
      .def("__len__", [](const Dataset& d) { return d.graphs.size(); })
      .def("image_ids", [](const Dataset& d) {
        std::vector<std::string> ids;
        for (const auto& g : d.graphs) ids.push_back(g.image_id);
        return ids;
      })
      .def("subset", [](const Dataset& d, const std::string& split) { return d.subset(split_from(split)); })
      .def("num_relations", [](const Dataset& d) {
        std::size_t n = 0;
        for (const auto& g : d.graphs) n += g.relations.size();
        return n;
      });
  m.def("load_dataset",
        [](const std::filesystem::path& corpus, const std::filesystem::path& vocab,
           const std::filesystem::path& splits) { return load_dataset(corpus, vocab, splits); },
        py::arg("corpus"), py::arg("vocab"), py::arg("splits"));

  py::class_<FrequencyTable>(m, "FrequencyTable")
      .def("probability",
           [](const FrequencyTable& t, const std::string& head, const std::string& tail,
              const std::string& predicate) {
             const auto h = t.vocab().object_index(head);
             const auto tl = t.vocab().object_index(tail);
             const auto p = t.vocab().predicate_index(predicate);
             if (!h || !tl || !p) throw std::invalid_argument("unknown class or predicate");
             return t.probability(*h, *tl, *p);
           })
      .def("save", [](const FrequencyTable& t, const std::filesystem::path& p) { save_frequency_table(t, p); });
  m.def("build_frequency_table",
        [](const Dataset& d) { return build_frequency_table(d.graphs, d.vocab); });
  m.def("load_frequency_table", &load_frequency_table);

  m.def(
      "mine_motifs",
      [](const Dataset& d, Count min_count, double min_lift) {
        const MotifLexicon lex = mine_motifs(d, {min_count, min_lift});
        py::list out;
        for (std::size_t i = 0; i < lex.motifs.size(); ++i) {
          const Motif& mo = lex.motifs[i];
          py::dict row;
          row["name"] = lex.name_of(MotifElement::motif(i));
          row["plate"] = lex.plate_notation(MotifElement::motif(i));
          row["lift"] = mo.lift;
          row["joint_count"] = mo.joint_count;
          row["length"] = mo.length;
          row["round"] = mo.round;
          out.append(row);
        }
        return out;
      },
      py::arg("dataset"), py::arg("min_count") = 50, py::arg("min_lift") = 10.0);

  m.def("overlap_recall_ceiling", [](const Dataset& d) { return overlap_recall_ceiling(d).fraction(); });
  m.def(
      "guess_curve",
      [](const Dataset& train, const Dataset& eval, const std::string& target,
         const std::vector<std::string>& conditioning, int max_k) {
        auto element = [](const std::string& s) {
          const auto e = parse_element(s);
          if (!e) throw std::invalid_argument("unknown element: " + s);
          return *e;
        };
        std::vector<Element> cond;
        for (const auto& c : conditioning) cond.push_back(element(c));
        std::vector<double> acc;
        for (const auto& [k, v] : guess_curve(train, eval, element(target), cond, max_k).accuracy_at_k) {
          acc.push_back(v);
        }
        return acc;
      },
      py::arg("train"), py::arg("eval"), py::arg("target"), py::arg("conditioning"),
      py::arg("max_k") = 10);

  m.def(
      "evaluate",
      [](const std::filesystem::path& predictions, const Dataset& d, const std::string& mode,
         std::vector<int> ks, bool graph_constraints, double iou_threshold) {
        EvalConfig cfg;
        cfg.mode = mode_from(mode);
        cfg.ks = std::move(ks);
        cfg.graph_constraints = graph_constraints;
        cfg.iou_threshold = iou_threshold;
        return evaluate_corpus(predictions, d, cfg).recall;
      },
      py::arg("predictions"), py::arg("dataset"), py::arg("mode"),
      py::arg("ks") = std::vector<int>{20, 50, 100}, py::arg("graph_constraints") = true,
      py::arg("iou_threshold") = kDefaultMatchIou);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full = {"scenestat"};
        full.insert(full.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : full) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
