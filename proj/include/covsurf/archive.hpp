#pragma once

// JSON model archives. Everything prediction needs round-trips: the schema,
// the hierarchy, the synthetic-variable coefficients of the K* partition,
// the selected clusters and the final forest's nodes. Training-only payloads
// (per-cluster training scores, bootstrap/OOB row lists, the sweep curve and
// selection diagnostics) are deliberately left out.
//
// Key order and double formatting are fixed by the JSON library, so saving
// the same model twice produces identical bytes.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "covsurf/pipeline.hpp"

namespace covsurf {

inline constexpr int kModelArchiveVersion = 1;

namespace detail {

inline nlohmann::json forest_to_json(const Forest& forest) {
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& tree : forest.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& node : tree.nodes) {
      nodes.push_back({node.variable, node.categorical ? 1 : 0,
                       node.threshold, node.level_mask, node.left, node.right,
                       node.label});
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  return {{"mtry", forest.mtry},
          {"seed", forest.seed},
          {"n_train", forest.n_train},
          {"classes", forest.classes},
          {"schema", schema_to_json(forest.schema)},
          {"trees", std::move(trees)}};
}

inline Forest forest_from_json(const nlohmann::json& j) {
  Forest forest;
  forest.mtry = j.at("mtry").get<int>();
  forest.seed = j.at("seed").get<std::uint64_t>();
  forest.n_train = j.at("n_train").get<std::size_t>();
  forest.classes = j.at("classes").get<std::vector<std::string>>();
  forest.schema = schema_from_json(j.at("schema"));
  for (const auto& jt : j.at("trees")) {
    Tree tree;
    for (const auto& jn : jt.at("nodes")) {
      if (!jn.is_array() || jn.size() != 7) {
        throw std::runtime_error("bad node");
      }
      TreeNode node;
      node.variable = jn[0].get<int>();
      node.categorical = jn[1].get<int>() != 0;
      node.threshold = jn[2].get<double>();
      node.level_mask = jn[3].get<std::uint32_t>();
      node.left = jn[4].get<int>();
      node.right = jn[5].get<int>();
      node.label = jn[6].get<int>();
      tree.nodes.push_back(node);
    }
    if (tree.nodes.empty()) throw std::runtime_error("empty tree");
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

inline nlohmann::json cluster_to_json(const SyntheticVariable& sv) {
  nlohmann::json terms = nlohmann::json::array();
  for (const SyntheticTerm& term : sv.terms) {
    nlohmann::json jt{{"column", term.column}};
    if (term.level_beta.empty()) {
      jt["beta"] = term.beta;
    } else {
      jt["level_beta"] = term.level_beta;
    }
    terms.push_back(std::move(jt));
  }
  return {{"columns", sv.columns},
          {"lambda1", sv.lambda1},
          {"beta0", sv.beta0},
          {"terms", std::move(terms)}};
}

inline SyntheticVariable cluster_from_json(const nlohmann::json& j) {
  SyntheticVariable sv;
  sv.columns = j.at("columns").get<std::vector<int>>();
  sv.lambda1 = j.at("lambda1").get<double>();
  sv.beta0 = j.at("beta0").get<double>();
  for (const auto& jt : j.at("terms")) {
    SyntheticTerm term;
    term.column = jt.at("column").get<int>();
    if (jt.contains("level_beta")) {
      term.level_beta = jt.at("level_beta").get<std::vector<double>>();
    } else {
      term.beta = jt.at("beta").get<double>();
    }
    sv.terms.push_back(std::move(term));
  }
  return sv;
}

inline nlohmann::json params_to_json(const PipelineParams& params) {
  return {{"kmin", params.kmin},
          {"kmax", params.kmax},
          {"sweep_trees", params.sweep_trees},
          {"final_trees", params.final_trees},
          {"vsurf",
           {{"nfor", params.vsurf.nfor},
            {"trees", params.vsurf.trees},
            {"mtry", params.vsurf.mtry},
            {"nested_reps", params.vsurf.nested_reps},
            {"vi_repeats", params.vsurf.vi_repeats}}}};
}

inline PipelineParams params_from_json(const nlohmann::json& j) {
  PipelineParams params;
  params.kmin = j.at("kmin").get<int>();
  params.kmax = j.at("kmax").get<int>();
  params.sweep_trees = j.at("sweep_trees").get<int>();
  params.final_trees = j.at("final_trees").get<int>();
  const auto& jv = j.at("vsurf");
  params.vsurf.nfor = jv.at("nfor").get<int>();
  params.vsurf.trees = jv.at("trees").get<int>();
  params.vsurf.mtry = jv.at("mtry").get<int>();
  params.vsurf.nested_reps = jv.at("nested_reps").get<int>();
  params.vsurf.vi_repeats = jv.at("vi_repeats").get<int>();
  return params;
}

}  // namespace detail

inline nlohmann::json model_to_json(const CovsurfModel& model) {
  nlohmann::json merges = nlohmann::json::array();
  for (const Merge& m : model.hierarchy.merges) {
    merges.push_back({m.left, m.right, m.height});
  }
  nlohmann::json clusters = nlohmann::json::array();
  for (const SyntheticVariable& sv : model.partition.clusters) {
    clusters.push_back(detail::cluster_to_json(sv));
  }
  return {{"format", "covsurf-model"},
          {"version", kModelArchiveVersion},
          {"seed", model.seed},
          {"params", detail::params_to_json(model.params)},
          {"schema", schema_to_json(model.schema)},
          {"classes", model.classes},
          {"hierarchy",
           {{"p", model.hierarchy.p},
            {"leaf_names", model.hierarchy.leaf_names},
            {"merges", std::move(merges)}}},
          {"k_star", model.k_star},
          {"homogeneity", model.partition.homogeneity},
          {"clusters", std::move(clusters)},
          {"selected", model.selected},
          {"forest", detail::forest_to_json(model.final_forest)}};
}

inline CovsurfModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "covsurf-model") {
    throw std::runtime_error("invalid model archive: wrong format tag");
  }
  if (j.value("version", -1) != kModelArchiveVersion) {
    throw std::runtime_error("invalid model archive: unsupported version");
  }
  try {
    CovsurfModel model;
    model.seed = j.at("seed").get<std::uint64_t>();
    model.params = detail::params_from_json(j.at("params"));
    model.schema = schema_from_json(j.at("schema"));
    model.classes = j.at("classes").get<std::vector<std::string>>();

    const auto& jh = j.at("hierarchy");
    model.hierarchy.p = jh.at("p").get<int>();
    model.hierarchy.leaf_names =
        jh.at("leaf_names").get<std::vector<std::string>>();
    for (const auto& jm : jh.at("merges")) {
      if (!jm.is_array() || jm.size() != 3) {
        throw std::runtime_error("bad merge");
      }
      Merge m;
      m.left = jm[0].get<int>();
      m.right = jm[1].get<int>();
      m.height = jm[2].get<double>();
      model.hierarchy.merges.push_back(m);
    }

    model.k_star = j.at("k_star").get<int>();
    model.partition.schema = model.schema;
    model.partition.homogeneity = j.at("homogeneity").get<double>();
    for (const auto& jc : j.at("clusters")) {
      model.partition.clusters.push_back(detail::cluster_from_json(jc));
    }
    if (model.partition.clusters.size() !=
        static_cast<std::size_t>(model.k_star)) {
      throw std::runtime_error("cluster count mismatch");
    }
    model.selected = j.at("selected").get<std::vector<int>>();
    for (int c : model.selected) {
      if (c < 0 || c >= model.k_star) {
        throw std::runtime_error("selected cluster out of range");
      }
    }
    model.final_forest = detail::forest_from_json(j.at("forest"));
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("invalid model archive: ") +
                             e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("invalid model archive: ") +
                             e.what());
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    if (what.rfind("invalid model archive", 0) == 0) throw;
    throw std::runtime_error("invalid model archive: " + what);
  }
}

inline void save_model(const CovsurfModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << model_to_json(model).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline CovsurfModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("invalid model archive: ") +
                             e.what());
  }
  return model_from_json(j);
}

}  // namespace covsurf
