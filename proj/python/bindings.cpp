#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "threatnet/experts.hpp"
#include "threatnet/graph_algorithms.hpp"
#include "threatnet/ingestion.hpp"
#include "threatnet/pipeline.hpp"
#include "threatnet/synth.hpp"

namespace py = pybind11;
using namespace threatnet;

namespace {

using EdgeList = std::vector<std::tuple<VertexId, VertexId, double>>;

CompactGraph make_graph(std::size_t n, const EdgeList& edges) {
  std::vector<CompactGraph::WeightedEdge> es;
  es.reserve(edges.size());
  for (const auto& [a, b, w] : edges) {
    if (a >= n || b >= n) throw Error("invalid_argument", "edge endpoint out of range");
    es.push_back({a, b, w});
  }
  return CompactGraph(n, es);
}

std::string as_text(const py::handle& v) {
  if (py::isinstance<py::bool_>(v)) return v.cast<bool>() ? "true" : "false";
  if (py::isinstance<py::str>(v)) return v.cast<std::string>();
  return py::str(v).cast<std::string>();
}

PipelineConfig config_from(const py::dict& overrides) {
  auto c = PipelineConfig::with_defaults();
  for (const auto& [k, v] : overrides) set_config_value(c, k.cast<std::string>(), as_text(v));
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "threatnet native core";
  m.attr("__version__") = std::string(library_version());

  // leaked on purpose: must outlive interpreter teardown
  static auto* error = new py::exception<Error>(m, "ThreatnetError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error->ptr(), (e.code() + ": " + e.what()).c_str());
    }
  });

  m.def("extract_cves", [](const std::string& text) { return extract_cves(text); }, py::arg("content"),
        "Distinct CVE identifiers mentioned in a post, in order of first mention.");
  m.def("is_cve_id", [](const std::string& s) { return is_cve_id(s); });

  m.def(
      "stationary_distribution",
      [](std::size_t n, const EdgeList& edges, double damping, double tol, int max_iter) {
        return stationary_distribution(make_graph(n, edges), {damping, tol, max_iter}).pi;
      },
      py::arg("n"), py::arg("edges"), py::arg("damping") = 0.85, py::arg("tol") = 1e-13,
      py::arg("max_iter") = 10000);
  m.def(
      "pagerank",
      [](std::size_t n, const EdgeList& edges, double damping) {
        return pagerank(make_graph(n, edges), {damping, 1e-13, 10000});
      },
      py::arg("n"), py::arg("edges"), py::arg("damping") = 0.85);
  m.def(
      "conductance",
      [](std::size_t n, const EdgeList& edges, const std::vector<VertexId>& subset, double damping) {
        const auto g = make_graph(n, edges);
        return conductance(g, stationary_distribution(g, {damping, 1e-13, 10000}), subset);
      },
      py::arg("n"), py::arg("edges"), py::arg("subset"), py::arg("damping") = 0.85);
  m.def(
      "betweenness", [](std::size_t n, const EdgeList& edges) { return betweenness(make_graph(n, edges)); },
      py::arg("n"), py::arg("edges"));
  m.def(
      "communities",
      [](std::size_t n, const EdgeList& edges, std::uint64_t seed) {
        return detect_communities(make_graph(n, edges), seed);
      },
      py::arg("n"), py::arg("edges"), py::arg("seed") = 0);
  m.def(
      "min_distances",
      [](std::size_t n, const EdgeList& edges, const std::vector<VertexId>& sources,
         const std::vector<VertexId>& targets) { return min_distances_from(make_graph(n, edges), sources, targets); },
      py::arg("n"), py::arg("edges"), py::arg("sources"), py::arg("targets"));

  m.def(
      "welch_ttest",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto r = welch_ttest_onesided(a, b);
        return py::dict(py::arg("t_stat") = r.t_stat, py::arg("dof") = r.dof, py::arg("p_value") = r.p_value);
      },
      py::arg("a"), py::arg("b"), "One-sided Welch test of mean(a) > mean(b).");

  m.def(
      "synth",
      [](const std::filesystem::path& dir, std::size_t n_forums, std::size_t users_per_forum, std::size_t days,
         std::uint64_t seed, bool planted) {
        SynthConfig c;
        c.n_forums = n_forums;
        c.users_per_forum = users_per_forum;
        c.days = days;
        c.seed = seed;
        c.signal = planted ? SignalKind::planted : SignalKind::none;
        const auto f = generate(c, dir);
        return py::dict(py::arg("posts") = f.posts, py::arg("incidents") = f.incidents,
                        py::arg("cpe_map") = f.cpe_map);
      },
      py::arg("dir"), py::arg("n_forums") = 10, py::arg("users_per_forum") = 200, py::arg("days") = 500,
      py::arg("seed") = 1, py::arg("planted") = true);

  m.def("subcommands", &subcommands);
  m.def(
      "default_config",
      [](const py::dict& overrides) {
        std::ostringstream out;
        write_config(out, config_from(overrides));
        return py::module_::import("json").attr("loads")(out.str());
      },
      py::arg("overrides") = py::dict());
  m.def(
      "run",
      [](const std::string& subcommand, const py::dict& overrides) {
        const auto config = config_from(overrides);
        std::ostringstream log;
        std::vector<std::filesystem::path> written;
        {
          py::gil_scoped_release release;
          written = run(subcommand, config, log);
        }
        return py::make_tuple(written, log.str());
      },
      py::arg("subcommand"), py::arg("overrides") = py::dict(),
      "Runs a pipeline subcommand with config overrides; returns (files written, log text).");
  m.def("sha256_file", &sha256_file);
}
