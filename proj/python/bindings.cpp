#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "mazero/awpo.hpp"
#include "mazero/envs/bandit.hpp"
#include "mazero/envs/gridworld.hpp"
#include "mazero/envs/matrix_game.hpp"
#include "mazero/model/tabular_model.hpp"
#include "mazero/model/transforms.hpp"
#include "mazero/oracles/suites.hpp"
#include "mazero/oslambda.hpp"
#include "mazero/search.hpp"
#include "mazero/train/trainer.hpp"

namespace py = pybind11;
using namespace mazero;

namespace {

ConfigMap ToConfig(const std::map<std::string, std::string>& kv) {
  ConfigMap m;
  for (const auto& [k, v] : kv) m.Set(k, v);
  return m;
}

py::dict SearchMatrixGame(const std::vector<double>& payoff, int agents, int actions,
                          const std::map<std::string, std::string>& search, std::uint64_t seed) {
  MatrixGameSpec spec{agents, actions, payoff};
  MatrixGameEnv env(spec);
  TabularModel model(env);
  SearchConfig cfg;
  LoadSearchConfig(ToConfig(search), cfg);
  RngStream rng(seed, 0);
  const SearchResult r = run_search(model, TabularModel::Encode(0, agents), cfg, rng);
  std::vector<std::vector<int>> acts;
  for (const JointAction& a : r.actions) acts.push_back(a.actions);
  py::dict d;
  d["actions"] = acts;
  d["visit_counts"] = r.visit_counts;
  d["visit_policy"] = r.visit_policy;
  d["advantages"] = r.advantages;
  d["root_value"] = r.root_value;
  d["chosen"] = r.chosen.actions;
  return d;
}

py::dict Train(const std::map<std::string, std::string>& config, std::uint64_t seed) {
  Trainer trainer(ToConfig(config), seed);
  const EvalStats fin = trainer.Run({});
  const EvalStats raw = trainer.Evaluate(EvalMode::kRawPolicy, trainer.eval_round());
  py::dict d;
  d["with_search"] = fin.mean;
  d["with_search_std"] = fin.std;
  d["raw_policy"] = raw.mean;
  d["env_steps"] = trainer.env_steps();
  d["gradient_steps"] = trainer.gradient_steps();
  return d;
}

}  // namespace

PYBIND11_MODULE(_mazero, m) {
  m.doc() = "Sampled multi-agent tree search with OS(lambda) backups and AWPO";

  static py::exception<Error> error(m, "MazeroError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string message = std::string(ToString(e.kind())) + ": " + e.what();
      PyErr_SetString(error.ptr(), message.c_str());
    }
  });

  m.def("value_transform", &value_transform, py::arg("x"));
  m.def("value_transform_inv", &value_transform_inv, py::arg("y"));
  m.def(
      "scalar_to_support",
      [](double x, int bins, double lo, double hi) { return scalar_to_support(x, CategoricalSupport(bins, lo, hi)); },
      py::arg("x"), py::arg("bins") = 10, py::arg("lo") = -5.0, py::arg("hi") = 5.0);

  m.def("keep_count", [](std::size_t n, double rho) { return KeepCount(n, rho); }, py::arg("n"), py::arg("rho"));
  m.def(
      "top_quantile", [](const std::vector<double>& u, double rho) { return top_quantile(u, rho); },
      py::arg("returns"), py::arg("rho"));
  m.def(
      "v_lambda",
      [](const std::vector<std::vector<double>>& buckets, double rho, double lambda) {
        DepthBuckets b;
        for (std::size_t d = 0; d < buckets.size(); ++d) {
          for (double x : buckets[d]) b.Insert(static_cast<int>(d), x);
        }
        return b.VLambda(rho, lambda);
      },
      py::arg("returns_by_depth"), py::arg("rho"), py::arg("lam"));

  m.def(
      "awpo_weights",
      [](const std::vector<double>& visit_policy, const std::vector<double>& advantages, double alpha,
         bool standardize) {
        PolicyTarget t;
        for (std::size_t i = 0; i < visit_policy.size(); ++i) t.actions.push_back(JointAction{static_cast<int>(i)});
        t.visit_policy = visit_policy;
        t.advantages = advantages;
        t.alpha = alpha;
        return awpo_weights(t, AwpoOptions{standardize, false});
      },
      py::arg("visit_policy"), py::arg("advantages"), py::arg("alpha"), py::arg("standardize") = false);
  m.def(
      "eta_star",
      [](const std::vector<double>& pi, const std::vector<double>& adv, double alpha) {
        const EtaStar e = eta_star(pi, adv, alpha);
        return py::make_tuple(e.eta, e.log_normalizer);
      },
      py::arg("pi"), py::arg("advantages"), py::arg("alpha"));
  m.def(
      "kkt_residual",
      [](const std::vector<double>& eta, const std::vector<double>& pi, const std::vector<double>& adv,
         double alpha) { return kkt_residual(eta, pi, adv, alpha); },
      py::arg("eta"), py::arg("pi"), py::arg("advantages"), py::arg("alpha"));

  m.def(
      "bandit_t", [](const std::vector<double>& pi, int k) { return bandit_t(pi, k); }, py::arg("pi"),
      py::arg("k"));
  m.def(
      "bandit_experiment",
      [](const std::map<std::string, std::string>& config) {
        BanditExperimentConfig c;
        c.Load(ToConfig(config));
        std::vector<py::tuple> rows;
        for (const BanditCurvePoint& p : bandit_experiment(c)) {
          rows.push_back(py::make_tuple(p.seed, p.step, p.loss_bc, p.loss_awpo, p.value_bc, p.value_awpo));
        }
        return rows;
      },
      py::arg("config") = std::map<std::string, std::string>{});

  m.def("search_matrix_game", &SearchMatrixGame, py::arg("payoff"), py::arg("agents"), py::arg("actions"),
        py::arg("search") = std::map<std::string, std::string>{}, py::arg("seed") = 0);
  m.def(
      "gridworld_optimal_return",
      [](double discount) { return gridworld_value_iteration(GridworldSpec{}, discount).optimal_return; },
      py::arg("discount") = 0.99);
  m.def("train", &Train, py::arg("config"), py::arg("seed") = 1);
  m.def(
      "verify",
      [](int trees, int awpo_instances, int gradient_coordinates, std::uint64_t seed) {
        verify::VerifyOptions o;
        o.trees = trees;
        o.awpo_instances = awpo_instances;
        o.gradient_coordinates = gradient_coordinates;
        o.seed = seed;
        std::vector<py::dict> out;
        for (const verify::SuiteReport& r : verify::RunAll(o)) {
          py::dict d;
          d["suite"] = r.suite;
          d["pass"] = r.pass;
          d["cases"] = r.cases;
          d["max_error"] = r.max_error;
          d["tolerance"] = r.tolerance;
          out.push_back(d);
        }
        return out;
      },
      py::arg("trees") = 1000, py::arg("awpo_instances") = 1000, py::arg("gradient_coordinates") = 120,
      py::arg("seed") = 0);
}
