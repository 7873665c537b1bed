#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "utopk/bruteforce.hpp"
#include "utopk/errors.hpp"
#include "utopk/experiment.hpp"
#include "utopk/topk_engine.hpp"

namespace py = pybind11;
using namespace utopk;

namespace {

// Oracle backed by a Python callable taking a list of frame ids.
class CallableOracle final : public Oracle {
 public:
  explicit CallableOracle(std::function<std::vector<double>(std::vector<FrameId>)> fn)
      : fn_(std::move(fn)) {}

 protected:
  std::vector<double> score_batch(std::span<const FrameId> frame_ids) override {
    auto out = fn_(std::vector<FrameId>(frame_ids.begin(), frame_ids.end()));
    if (out.size() != frame_ids.size()) {
      throw InvalidArgument("oracle returned " + std::to_string(out.size()) + " scores for " +
                            std::to_string(frame_ids.size()) + " frames");
    }
    return out;
  }

 private:
  std::function<std::vector<double>(std::vector<FrameId>)> fn_;
};

using Entry = std::tuple<FrameId, std::int64_t, std::variant<DiscreteScoreDist, Bin>>;

UncertainRelation make_relation(const std::vector<Entry>& entries, const ScoreGrid& grid) {
  std::vector<XTuple> rows;
  rows.reserve(entries.size());
  for (const auto& [id, ts, state] : entries) {
    rows.push_back({id, ts, state});
  }
  return UncertainRelation::build(std::move(rows), grid);
}

py::dict stats_dict(const QueryStats& s) {
  py::dict d;
  d["iterations"] = s.iterations;
  d["bootstrap_cleaned"] = s.bootstrap_cleaned;
  d["frames_cleaned"] = s.frames_cleaned;
  d["oracle_batches"] = s.oracle_batches;
  d["order_rebuilds"] = s.order_rebuilds;
  d["expectation_evaluations"] = s.expectation_evaluations;
  d["zero_factor_divisions"] = s.zero_factor_divisions;
  d["confidence_trajectory"] = s.confidence_trajectory;
  return d;
}

}  // namespace

PYBIND11_MODULE(_utopk, m) {
  m.doc() = "Top-K queries over uncertain frame scores with oracle cleaning";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<EmptySupport>(m, "EmptySupport", base.ptr());
  py::register_exception<DuplicateFrame>(m, "DuplicateFrame", base.ptr());
  py::register_exception<GridMismatch>(m, "GridMismatch", base.ptr());
  py::register_exception<AlreadyCertain>(m, "AlreadyCertain", base.ptr());
  py::register_exception<UnknownFrame>(m, "UnknownFrame", base.ptr());
  py::register_exception<InsufficientCertain>(m, "InsufficientCertain", base.ptr());
  py::register_exception<InsufficientFrames>(m, "InsufficientFrames", base.ptr());
  py::register_exception<TooManyWorlds>(m, "TooManyWorlds", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());

  py::class_<ScoreGrid>(m, "ScoreGrid")
      .def(py::init<double, double, Bin>(), py::arg("origin"), py::arg("step"), py::arg("bins"))
      .def_static("counting", &ScoreGrid::counting, py::arg("bins"))
      .def_readonly("origin", &ScoreGrid::origin)
      .def_readonly("step", &ScoreGrid::step)
      .def_readonly("bins", &ScoreGrid::bins)
      .def("score_of", &ScoreGrid::score_of)
      .def("nearest_bin", &ScoreGrid::nearest_bin)
      .def("__repr__", [](const ScoreGrid& g) {
        return "ScoreGrid(origin=" + std::to_string(g.origin) + ", step=" +
               std::to_string(g.step) + ", bins=" + std::to_string(g.bins) + ")";
      });

  py::class_<GaussianMixture>(m, "GaussianMixture")
      .def(py::init([](const std::vector<std::tuple<double, double, double>>& comps) {
             std::vector<MixtureComponent> out;
             for (const auto& [w, mu, sigma] : comps) {
               out.push_back({w, mu, sigma});
             }
             return GaussianMixture(std::move(out));
           }),
           py::arg("components"), "List of (weight, mean, stddev).")
      .def_static("normal", &GaussianMixture::normal, py::arg("mean"), py::arg("stddev"))
      .def_property_readonly("components", [](const GaussianMixture& g) {
        std::vector<std::tuple<double, double, double>> out;
        for (const auto& c : g.components()) {
          out.emplace_back(c.weight, c.mean, c.stddev);
        }
        return out;
      })
      .def("moments", [](const GaussianMixture& g) {
        const auto mm = mixture_moments(g);
        return std::make_pair(mm.mean, mm.variance);
      });

  py::class_<DiscreteScoreDist>(m, "DiscreteScoreDist")
      .def_static("from_probabilities",
                  [](const ScoreGrid& grid, const std::vector<std::pair<Bin, double>>& probs) {
                    return DiscreteScoreDist::from_probabilities(grid, probs);
                  })
      .def_static("point_mass", &DiscreteScoreDist::point_mass)
      .def("pmf", &DiscreteScoreDist::pmf)
      .def("cdf", &DiscreteScoreDist::cdf)
      .def("support", &DiscreteScoreDist::support)
      .def_property_readonly("grid", &DiscreteScoreDist::grid)
      .def_property_readonly("mean_bin", &DiscreteScoreDist::mean_bin)
      .def_property_readonly("mean_score", &DiscreteScoreDist::mean_score)
      .def_property_readonly("variance_score", &DiscreteScoreDist::variance_score);

  m.def(
      "quantize",
      [](const GaussianMixture& mix, const ScoreGrid& grid, bool proportional, bool fold_below) {
        QuantizeOptions opt;
        opt.redistribution = proportional ? Redistribution::kProportional : Redistribution::kUniform;
        opt.fold_below = fold_below;
        return quantize(mix, grid, opt);
      },
      py::arg("mixture"), py::arg("grid"), py::arg("proportional") = false,
      py::arg("fold_below") = true);

  py::class_<TopKAnswer>(m, "TopKAnswer")
      .def_property_readonly("members",
                             [](const TopKAnswer& a) {
                               std::vector<std::pair<FrameId, Bin>> out;
                               for (const auto& r : a.members) {
                                 out.emplace_back(r.frame_id, r.score);
                               }
                               return out;
                             })
      .def_readonly("threshold", &TopKAnswer::threshold)
      .def_readonly("penultimate", &TopKAnswer::penultimate)
      .def_readonly("confidence", &TopKAnswer::confidence);

  py::class_<UncertainRelation>(m, "Relation")
      .def(py::init(&make_relation), py::arg("entries"), py::arg("grid"),
           "entries: (frame_id, timestamp, DiscreteScoreDist or certain bin).")
      .def("__len__", &UncertainRelation::size)
      .def_property_readonly("grid", &UncertainRelation::grid)
      .def_property_readonly("certain_count", &UncertainRelation::certain_count)
      .def_property_readonly("uncertain_count", &UncertainRelation::uncertain_count)
      .def("is_certain", &UncertainRelation::is_certain)
      .def("uncertain_ids", &UncertainRelation::uncertain_ids)
      .def("certain_ids", &UncertainRelation::certain_ids)
      .def("cleaned_ids", &UncertainRelation::cleaned_ids)
      .def("clean", &UncertainRelation::clean, py::arg("frame_id"), py::arg("score_bin"))
      .def("topk_certain", &UncertainRelation::topk_certain, py::arg("k"));

  m.def(
      "topk_prob", [](const UncertainRelation& rel, const TopKAnswer& a) { return topk_prob(rel, a); },
      py::arg("relation"), py::arg("answer"));
  m.def(
      "expected_conf",
      [](const UncertainRelation& rel, const TopKAnswer& a, FrameId f) {
        return expected_conf(rel, a, f);
      },
      py::arg("relation"), py::arg("answer"), py::arg("frame_id"));
  m.def(
      "bf_topk_prob",
      [](const UncertainRelation& rel, const TopKAnswer& a) { return bf_topk_prob(rel, a); },
      py::arg("relation"), py::arg("answer"));
  m.def(
      "bf_expected_conf",
      [](const UncertainRelation& rel, const TopKAnswer& a, FrameId f) {
        return bf_expected_conf(rel, a, f);
      },
      py::arg("relation"), py::arg("answer"), py::arg("frame_id"));

  m.def(
      "run_query",
      [](UncertainRelation& rel, std::function<std::vector<double>(std::vector<FrameId>)> oracle,
         std::size_t k, double thres, std::size_t batch) {
        CallableOracle o(std::move(oracle));
        QueryConfig cfg;
        cfg.k = k;
        cfg.thres = thres;
        cfg.batch = batch;
        auto result = run_query(rel, o, cfg);
        py::dict d = stats_dict(result.stats);
        d["oracle_invocations"] = o.invocations();
        return py::make_tuple(result.answer, d);
      },
      py::arg("relation"), py::arg("oracle"), py::arg("k"), py::arg("thres") = 0.9,
      py::arg("batch") = 8,
      "Cleans the relation in place. The oracle maps a list of frame ids to scores in "
      "score units. Returns (answer, stats).");

  m.def(
      "run_experiment_json",
      [](const std::string& config_json) {
        auto cfg = ExperimentConfig::from_json_text(config_json);
        cfg.quiet = true;
        cfg.report_path.clear();
        py::gil_scoped_release release;
        const auto report = run_experiment(cfg);
        return report_to_json(cfg, report);
      },
      py::arg("config_json"));
}
