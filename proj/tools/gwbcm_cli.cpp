// Command-line surface for the GW barycentric-coding library.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure
// (unconverged results are fatal unless --allow-unconverged is given).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <gwbcm/gwbcm.hpp>

namespace {

using nlohmann::json;
using namespace gwbcm;

constexpr const char* kNetworkSchema =
    "network JSON: {\"size\": M, \"weights\": [[M x M floats]], "
    "\"masses\": [M floats]}; point-cloud CSV (rows \"x,y[,z][,mass]\") is "
    "auto-converted to a Euclidean distance network when the path ends in .csv";

constexpr const char* kLambdaSchema =
    "lambda JSON: {\"lambda\": [...], \"residual\": r, "
    "\"normalized_residual\": r_hat, \"method\": \"fixed_point\"|\"blowup\", "
    "\"seed\": n}";

struct SolverFlags {
  std::string method = "frank-wolfe";
  double tol = 1e-9;
  int max_iter = 1000;
  double epsilon = 0.0;
  int restarts = 1;
  std::uint64_t seed = 0;
  int threads = 0;

  GwSolverConfig build() const {
    GwSolverConfig cfg;
    if (method == "frank-wolfe") cfg.method = GwMethod::frank_wolfe;
    else if (method == "entropic") cfg.method = GwMethod::entropic;
    else if (method == "brute") cfg.method = GwMethod::brute;
    else throw CLI::ValidationError("--method", "unknown method " + method);
    cfg.tol = tol;
    cfg.max_iter = max_iter;
    cfg.epsilon = epsilon;
    cfg.restarts = restarts;
    cfg.seed = seed;
    cfg.threads = threads;
    return cfg;
  }

  // Experiment subcommands use --method for the analysis route, so the GW
  // backend selector moves to --gw-method there.
  void attach(CLI::App* cmd, bool method_flag = true) {
    cmd->add_option(method_flag ? "--method" : "--gw-method", method,
                    "GW backend: frank-wolfe|entropic|brute")
        ->capture_default_str();
    cmd->add_option("--tol", tol, "relative objective tolerance")->capture_default_str();
    cmd->add_option("--max-iter", max_iter, "solver iteration cap")->capture_default_str();
    cmd->add_option("--epsilon", epsilon,
                    "entropic regularization (0 = 5e-3 * max linearized cost)");
    cmd->add_option("--restarts", restarts, "solver restarts (best result kept)")
        ->capture_default_str();
    cmd->add_option("--seed", seed, "seed for all randomness")->capture_default_str();
    cmd->add_option("--threads", threads, "worker threads (0 = hardware)")
        ->capture_default_str();
  }
};

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Network load_network_auto(const std::string& path, bool as_network) {
  if (!as_network && ends_with(path, ".csv"))
    return pairwise_distance_network(load_point_cloud(path));
  return load_network(path);
}

void emit(const std::string& text, const std::string& output_path) {
  if (output_path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << "\n";
  } else {
    std::ofstream out(output_path);
    if (!out) throw ParseError("cannot write " + output_path);
    out << text;
    if (!text.empty() && text.back() != '\n') out << "\n";
  }
}

void emit_json(const json& j, const std::string& output_path) {
  emit(j.dump(2), output_path);
}

json lambda_json(const AnalysisResult& res, AnalysisMethod method,
                 std::uint64_t seed) {
  return lambda_result_to_json(res.lambda.lambda, res.residual,
                               res.normalized_residual,
                               analysis_method_name(method), seed);
}

Vector parse_lambda_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
      throw ParseError("bad --lambda entry '" + tok + "'");
    values.push_back(v);
  }
  if (values.empty()) throw ParseError("--lambda is empty");
  Vector out(static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) out[static_cast<Index>(i)] = values[i];
  return out;
}

Vector load_masses_file(const std::string& path, Index expected) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!j.is_array() || static_cast<Index>(j.size()) != expected)
    throw SchemaError(path + ": expected a JSON array of length " +
                      std::to_string(expected));
  Vector v(expected);
  for (Index i = 0; i < expected; ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

json alignment_json(const BlowupAlignment& a) {
  auto matrix_rows = [](const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  json q = json::array();
  for (Index i = 0; i < a.q_b.size(); ++i) q.push_back(a.q_b[i]);
  json templates = json::array();
  for (const auto& t : a.templates_b) templates.push_back(matrix_rows(t));
  json maps = json::array();
  for (const auto& m : a.index_maps) {
    json one = json::array();
    for (const auto idx : m) one.push_back(idx);
    maps.push_back(std::move(one));
  }
  json refmap = json::array();
  for (const auto idx : a.reference_map) refmap.push_back(idx);
  return json{{"size_b", a.size_b},
              {"q_b", std::move(q)},
              {"templates_b", std::move(templates)},
              {"reference_b", matrix_rows(a.reference_b)},
              {"index_maps", std::move(maps)},
              {"reference_map", std::move(refmap)},
              {"dropped_mass", a.dropped_mass}};
}

int command_exit_code = 0;

void require_converged(bool converged, bool allow_unconverged, const char* what) {
  if (converged) return;
  if (!allow_unconverged)
    throw NotConverged(std::string(what) +
                       " did not converge (pass --allow-unconverged to accept)");
  std::cerr << "warning: " << what << " did not converge; accepting because "
            << "--allow-unconverged was given\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gromov-Wasserstein barycentric coding toolkit"};
  app.require_subcommand(1);
  app.footer(std::string("File formats:\n  ") + kNetworkSchema + "\n  " + kLambdaSchema);

  std::string output_path;
  bool allow_unconverged = false;
  bool as_network = false;
  app.add_option("--output", output_path, "write the result here instead of stdout");
  app.add_flag("--allow-unconverged", allow_unconverged,
               "accept unconverged numerical results (exit 0 instead of 4)");
  app.add_flag("--as-network", as_network,
               "parse every input as network JSON, never as point-cloud CSV");

  // dist ----------------------------------------------------------------
  auto* dist = app.add_subcommand(
      "dist", std::string("GW distance between two networks. Inputs: ") + kNetworkSchema);
  std::string dist_a, dist_b;
  SolverFlags dist_solver;
  dist->add_option("a", dist_a, "first network")->required();
  dist->add_option("b", dist_b, "second network")->required();
  dist_solver.attach(dist);
  dist->callback([&] {
    const Network A = load_network_auto(dist_a, as_network);
    const Network B = load_network_auto(dist_b, as_network);
    const GwResult r = gw_distance(A, B, dist_solver.build());
    require_converged(r.converged, allow_unconverged, "GW solve");
    emit_json(json{{"gw2", r.cost},
                   {"gw", r.gw()},
                   {"converged", r.converged},
                   {"iterations", r.iterations},
                   {"method", dist_solver.method}},
              output_path);
  });

  // synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand(
      "synth", "Synthesize a GW barycenter by fixed-point iteration. "
               "Output: network JSON.");
  std::vector<std::string> synth_templates;
  std::string synth_lambda, synth_masses = "uniform", synth_init = "random";
  std::uint64_t synth_lambda_seed = 0;
  bool synth_have_lambda_seed = false;
  Index synth_size = 0;
  int synth_max_outer = 100;
  double synth_fp_tol = 1e-9;
  SolverFlags synth_solver;
  synth->add_option("--templates", synth_templates, "template networks")
      ->required()
      ->expected(-1);
  synth->add_option("--lambda", synth_lambda, "comma-separated weights, e.g. 0.2,0.3,0.5");
  synth->add_option("--lambda-seed", synth_lambda_seed,
                    "draw lambda from the uniform Dirichlet with this seed")
      ->trigger_on_parse()
      ->each([&](const std::string&) { synth_have_lambda_seed = true; });
  synth->add_option("--size", synth_size, "barycenter node count M")->required();
  synth->add_option("--masses", synth_masses,
                    "'uniform' or a path to a JSON array of length M");
  synth->add_option("--init", synth_init, "random|resample (first template)")
      ->capture_default_str();
  synth->add_option("--max-outer", synth_max_outer, "outer iteration cap")
      ->capture_default_str();
  synth->add_option("--fp-tol", synth_fp_tol, "fixed-point relative tolerance")
      ->capture_default_str();
  synth_solver.attach(synth);
  synth->callback([&] {
    std::vector<Network> templates;
    for (const auto& path : synth_templates)
      templates.push_back(load_network_auto(path, as_network));
    SimplexWeights lambda =
        synth_have_lambda_seed
            ? sample_simplex_dirichlet(static_cast<Index>(templates.size()),
                                       synth_lambda_seed)
            : validate_simplex(parse_lambda_list(synth_lambda));
    if (lambda.size() != static_cast<Index>(templates.size()))
      throw DimensionMismatch("lambda length vs template count");
    SynthesisConfig cfg;
    cfg.target_size = synth_size;
    if (synth_masses != "uniform")
      cfg.target_masses = load_masses_file(synth_masses, synth_size);
    cfg.max_outer_iter = synth_max_outer;
    cfg.fp_tol = synth_fp_tol;
    cfg.init = synth_init == "resample" ? SynthesisInit::first_template_resampled
                                        : SynthesisInit::random_seeded;
    cfg.solver = synth_solver.build();
    auto [bary, diag] = synthesize_barycenter(templates, lambda, cfg);
    require_converged(diag.converged, allow_unconverged, "barycenter iteration");
    emit_json(network_to_json(bary), output_path);
  });

  // geodesic --------------------------------------------------------------
  auto* geo = app.add_subcommand(
      "geodesic", "Interpolate two networks along a GW geodesic. Output: network JSON.");
  std::string geo_a, geo_b;
  double geo_t = 0.5;
  SolverFlags geo_solver;
  geo->add_option("a", geo_a)->required();
  geo->add_option("b", geo_b)->required();
  geo->add_option("--t", geo_t, "interpolation parameter in [0,1]")->required();
  geo_solver.attach(geo);
  geo->callback([&] {
    const Network A = load_network_auto(geo_a, as_network);
    const Network B = load_network_auto(geo_b, as_network);
    emit_json(network_to_json(geodesic_interpolate(A, B, geo_t, geo_solver.build())),
              output_path);
  });

  // blowup ----------------------------------------------------------------
  auto* blow = app.add_subcommand(
      "blowup",
      "Align templates against a network by node duplication. Output JSON: "
      "{size_b, q_b, templates_b, reference_b, index_maps, reference_map, "
      "dropped_mass}.");
  std::vector<std::string> blow_templates;
  std::string blow_input;
  double blow_support_tol = 1e-10;
  SolverFlags blow_solver;
  blow->add_option("--templates", blow_templates)->required()->expected(-1);
  blow->add_option("--input", blow_input, "reference network")->required();
  blow->add_option("--support-tol", blow_support_tol,
                   "support threshold relative to the largest plan entry")
      ->capture_default_str();
  blow_solver.attach(blow);
  blow->callback([&] {
    std::vector<Network> templates;
    for (const auto& path : blow_templates)
      templates.push_back(load_network_auto(path, as_network));
    const Network Y = load_network_auto(blow_input, as_network);
    emit_json(alignment_json(blowup_multi(templates, Y, blow_solver.build(),
                                          blow_support_tol)),
              output_path);
  });

  // analyze / analyze-bu ---------------------------------------------------
  struct AnalyzeFlags {
    std::vector<std::string> templates;
    std::string input;
    double support_tol = 1e-10;
    SolverFlags solver;
  };
  AnalyzeFlags fp_flags, bu_flags;
  auto add_analyze = [&](const char* name, const char* help, AnalyzeFlags& flags,
                         bool blowup_route) {
    auto* cmd = app.add_subcommand(name, std::string(help) + " Output: " + kLambdaSchema);
    cmd->add_option("--templates", flags.templates)->required()->expected(-1);
    cmd->add_option("--input", flags.input, "network to analyze")->required();
    if (blowup_route)
      cmd->add_option("--support-tol", flags.support_tol)->capture_default_str();
    flags.solver.attach(cmd);
    cmd->callback([&, blowup_route] {
      std::vector<Network> templates;
      for (const auto& path : flags.templates)
        templates.push_back(load_network_auto(path, as_network));
      const Network Y = load_network_auto(flags.input, as_network);
      const AnalysisResult res =
          blowup_route
              ? analyze_blowup(templates, Y, flags.solver.build(), flags.support_tol)
              : analyze_fixed_point(templates, Y, flags.solver.build());
      emit_json(lambda_json(res,
                            blowup_route ? AnalysisMethod::blowup
                                         : AnalysisMethod::fixed_point,
                            flags.solver.seed),
                output_path);
    });
  };
  add_analyze("analyze",
              "Recover barycentric coordinates via the fixed-point system.",
              fp_flags, false);
  add_analyze("analyze-bu",
              "Recover barycentric coordinates via the blow-up system.",
              bu_flags, true);

  // mds ---------------------------------------------------------------------
  auto* mds = app.add_subcommand(
      "mds", "Classical MDS of a network's weight matrix. Output: CSV rows of "
             "coordinates (one point per row).");
  std::string mds_input;
  Index mds_dim = 2;
  mds->add_option("--input", mds_input)->required();
  mds->add_option("--dim", mds_dim, "embedding dimension")->capture_default_str();
  mds->callback([&] {
    const Network Y = load_network_auto(mds_input, as_network);
    const Embedding e = classical_mds(Y.weights, mds_dim);
    std::ostringstream csv;
    csv.precision(17);
    for (Index i = 0; i < e.points.rows(); ++i) {
      for (Index j = 0; j < e.points.cols(); ++j) {
        if (j) csv << ",";
        csv << e.points(i, j);
      }
      csv << "\n";
    }
    emit(csv.str(), output_path);
    std::cerr << "strain " << e.strain << "\n";
  });

  // experiment ---------------------------------------------------------------
  auto* experiment = app.add_subcommand("experiment", "desk-scale experiment pipelines");
  experiment->require_subcommand(1);

  // experiment recover
  auto* recover = experiment->add_subcommand(
      "recover", "Synthesize a barycenter with known lambda and recover it.");
  std::vector<std::string> rec_templates;
  std::string rec_method = "fixed-point", rec_lambda;
  std::uint64_t rec_lambda_seed = 0;
  bool rec_have_lambda_seed = false;
  Index rec_size = 0;
  SolverFlags rec_solver;
  recover->add_option("--templates", rec_templates)->required()->expected(-1);
  recover->add_option("--method", rec_method, "fixed-point|blowup")->capture_default_str();
  recover->add_option("--lambda", rec_lambda, "comma-separated true weights");
  recover->add_option("--lambda-seed", rec_lambda_seed, "Dirichlet seed for lambda")
      ->trigger_on_parse()
      ->each([&](const std::string&) { rec_have_lambda_seed = true; });
  recover->add_option("--size", rec_size, "barycenter size (fixed-point route)");
  rec_solver.attach(recover, false);
  recover->callback([&] {
    std::vector<Network> templates;
    for (const auto& path : rec_templates)
      templates.push_back(load_network_auto(path, as_network));
    const SimplexWeights lambda =
        rec_have_lambda_seed
            ? sample_simplex_dirichlet(static_cast<Index>(templates.size()),
                                       rec_lambda_seed)
            : validate_simplex(parse_lambda_list(rec_lambda));
    SynthesisConfig cfg;
    cfg.target_size = rec_size > 0 ? rec_size : templates.front().size();
    cfg.solver = rec_solver.build();
    const AnalysisMethod method = rec_method == "blowup" ? AnalysisMethod::blowup
                                                         : AnalysisMethod::fixed_point;
    const RecoveryReport rep = experiment_recover(templates, lambda, method, cfg);
    json true_l = json::array(), est_l = json::array();
    for (Index i = 0; i < rep.true_lambda.size(); ++i) true_l.push_back(rep.true_lambda[i]);
    for (Index i = 0; i < rep.estimated_lambda.size(); ++i)
      est_l.push_back(rep.estimated_lambda[i]);
    emit_json(json{{"true_lambda", true_l},
                   {"estimated_lambda", est_l},
                   {"linf_error", rep.linf_error},
                   {"reconstruction_gw2", rep.reconstruction_gw},
                   {"normalized_residual", rep.residual},
                   {"method", analysis_method_name(method)}},
              output_path);
  });

  // experiment classify
  auto* classify = experiment->add_subcommand(
      "classify", "Two-class synthetic benchmark (circle vs segment clouds): "
                  "max-coordinate and k-means accuracy of lambda coordinates.");
  int cls_queries = 50, cls_nodes = 25;
  std::string cls_method = "fixed-point";
  SolverFlags cls_solver;
  classify->add_option("--queries", cls_queries)->capture_default_str();
  classify->add_option("--nodes", cls_nodes)->capture_default_str();
  classify->add_option("--method", cls_method, "fixed-point|blowup")->capture_default_str();
  cls_solver.attach(classify, false);
  classify->callback([&] {
    const GwSolverConfig solver = cls_solver.build();
    const std::vector<Network> templates{
        pairwise_distance_network(make_circle_cloud(cls_nodes, solver.seed + 1)),
        pairwise_distance_network(make_segment_cloud(cls_nodes, solver.seed + 2))};
    const std::vector<int> template_labels{0, 1};
    std::vector<Vector> lambdas(cls_queries);
    std::vector<int> truth(cls_queries), predicted(cls_queries);
    const bool blowup_route = cls_method == "blowup";
    parallel_for(static_cast<std::size_t>(cls_queries), solver.threads, [&](std::size_t i) {
      const int label = static_cast<int>(i % 2);
      const std::uint64_t qseed = solver.seed + 1000 + i;
      const PointCloud cloud = label == 0 ? make_circle_cloud(cls_nodes, qseed)
                                          : make_segment_cloud(cls_nodes, qseed);
      const Network query = pairwise_distance_network(cloud);
      GwSolverConfig local = solver;
      local.threads = 1;
      const AnalysisResult res = blowup_route
                                     ? analyze_blowup(templates, query, local)
                                     : analyze_fixed_point(templates, query, local);
      truth[i] = label;
      predicted[i] = classify_max_coordinate(res.lambda, template_labels);
      lambdas[i] = res.lambda.lambda;
    });
    int hits = 0;
    for (int i = 0; i < cls_queries; ++i)
      if (predicted[i] == truth[i]) ++hits;
    const double max_acc = static_cast<double>(hits) / cls_queries;
    const KmeansResult km = kmeans_lambda(lambdas, 2, solver.seed, &truth);
    json rows = json::array();
    for (int i = 0; i < cls_queries; ++i) {
      json lam = json::array();
      for (Index s = 0; s < lambdas[i].size(); ++s) lam.push_back(lambdas[i][s]);
      rows.push_back(json{{"label", truth[i]},
                          {"predicted", predicted[i]},
                          {"lambda", std::move(lam)},
                          {"cluster", km.assignments[i]}});
    }
    emit_json(json{{"queries", cls_queries},
                   {"max_coordinate_accuracy", max_acc},
                   {"kmeans_accuracy", km.accuracy},
                   {"samples", std::move(rows)}},
              output_path);
  });

  // experiment occlude
  auto* occlude_cmd = experiment->add_subcommand(
      "occlude", "Occlusion reconstruction: analyze an occluded query against "
                 "occluded templates, resynthesize from the clean templates.");
  std::string occ_query;
  std::vector<std::string> occ_templates;
  std::string occ_circle, occ_box;
  std::string occ_method = "fixed-point";
  Index occ_size = 0;
  SolverFlags occ_solver;
  occlude_cmd->add_option("--query", occ_query, "query point cloud CSV")->required();
  occlude_cmd->add_option("--templates", occ_templates, "template point cloud CSVs")
      ->required()
      ->expected(-1);
  occlude_cmd->add_option("--mask-circle", occ_circle,
                          "cx,cy[,cz],r: remove points inside the ball");
  occlude_cmd->add_option("--mask-box", occ_box,
                          "lo1,lo2[,lo3],hi1,hi2[,hi3]: axis-aligned box");
  occlude_cmd->add_option("--size", occ_size, "reconstruction size (default: query size)");
  occlude_cmd->add_option("--method", occ_method, "fixed-point|blowup")
      ->capture_default_str();
  occ_solver.attach(occlude_cmd, false);
  occlude_cmd->callback([&] {
    const PointCloud query = load_point_cloud(occ_query);
    std::vector<PointCloud> templates;
    for (const auto& path : occ_templates) templates.push_back(load_point_cloud(path));
    OcclusionMask mask;
    if (!occ_circle.empty()) {
      const Vector values = parse_lambda_list(occ_circle);
      if (values.size() < 3 || values.size() > 4)
        throw ParseError("--mask-circle needs cx,cy[,cz],r");
      mask = OcclusionMask::ball(values.head(values.size() - 1),
                                 values[values.size() - 1]);
    } else if (!occ_box.empty()) {
      const Vector values = parse_lambda_list(occ_box);
      if (values.size() != 4 && values.size() != 6)
        throw ParseError("--mask-box needs lo1,lo2[,lo3],hi1,hi2[,hi3]");
      const Index d = values.size() / 2;
      mask = OcclusionMask::box(values.head(d), values.tail(d));
    } else {
      throw CLI::ValidationError("--mask-circle", "a mask is required");
    }
    SynthesisConfig cfg;
    cfg.target_size = occ_size > 0 ? occ_size : query.size();
    cfg.solver = occ_solver.build();
    const AnalysisMethod method = occ_method == "blowup" ? AnalysisMethod::blowup
                                                         : AnalysisMethod::fixed_point;
    auto [reconstruction, report] = experiment_occlusion(
        query, templates, mask, method, cfg, cfg.solver.seed + 777);
    json est = json::array(), rnd = json::array();
    for (Index i = 0; i < report.estimated_lambda.size(); ++i)
      est.push_back(report.estimated_lambda[i]);
    for (Index i = 0; i < report.random_lambda.size(); ++i)
      rnd.push_back(report.random_lambda[i]);
    emit_json(json{{"estimated_lambda", est},
                   {"random_lambda", rnd},
                   {"reconstruction_gw2", report.reconstruction_gw},
                   {"random_gw2", report.random_gw},
                   {"beats_random", report.beats_random},
                   {"reconstruction", network_to_json(reconstruction)}},
              output_path);
  });

  // every subcommand's --help documents the file schemas
  const std::string schema_footer =
      std::string("File formats:\n  ") + kNetworkSchema + "\n  " + kLambdaSchema;
  for (CLI::App* sub : app.get_subcommands({})) {
    sub->footer(schema_footer);
    for (CLI::App* nested : sub->get_subcommands({})) nested->footer(schema_footer);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.category()) {
      case ErrorCategory::usage: return 2;
      case ErrorCategory::data: return 3;
      case ErrorCategory::numerical: return 4;
    }
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return command_exit_code;
}
