// targetiv: simulate, enumerate, identify, identify-filtered, estimate, validate.
#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "targetiv/commands.hpp"

using namespace targetiv;

namespace {

enum Exit { kOk = 0, kUsage = 1, kParse = 2, kAssumption = 3, kWeak = 4, kCheckFailed = 5 };

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ','))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

std::optional<json> optional_file(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return read_json_file(path);
}

int emit_error(const std::string& out, const std::string& type, const std::string& msg, int code) {
  json j = {{"error", {{"type", type}, {"message", msg}}}, {"exit_code", code}};
  try {
    write_json(j, out);
  } catch (const std::exception&) {
  }
  std::cerr << "targetiv: " << type << ": " << msg << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Identification with targeted discrete instruments"};
  app.require_subcommand(1);
  std::string out = "-";
  int threads = 1;
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Progress messages on standard error");

  auto add_common = [&](CLI::App* s) {
    s->add_option("--out", out, "Output path, '-' for standard output");
    s->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  };

  // simulate
  std::string model_path, errors_path, outcomes_path, moments_path, data_path, design, regime = "strict_one_to_one";
  SimulateArgs sim;
  std::uint64_t seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Draw a population from an ARUM and summarize it");
  simulate->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--errors", errors_path, "Error law JSON")->check(CLI::ExistingFile);
  simulate->add_option("--outcomes", outcomes_path, "Outcome model JSON")->check(CLI::ExistingFile);
  simulate->add_option("--n", sim.n, "Number of units")->required()->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "Random seed")->required();
  simulate->add_flag("--filter", sim.filter, "Also report observed-treatment moments");
  simulate->add_option("--z-probs", sim.z_probs, "Instrument assignment probabilities")->delimiter(',');
  simulate->add_option("--cluster-size", sim.cluster_size, "Units per cluster; Z assigned per cluster");
  simulate->add_flag("--allow-degenerate", sim.allow_degenerate, "Accept error laws with mass points");
  simulate->add_flag("--stream", sim.stream, "Accumulate moments without storing units");
  simulate->add_option("--dump", sim.dump, "Per-unit CSV output path");
  add_common(simulate);

  auto* enumerate = app.add_subcommand("enumerate", "Targeting structure, classes and exclusions");
  enumerate->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  enumerate->add_option("--regime", regime, "one_to_one, strict or strict_one_to_one")
      ->check(CLI::IsMember({"one_to_one", "strict", "strict_one_to_one"}));
  add_common(enumerate);

  IdentifyArgs ia;
  std::string homog;
  bool strict_estimands = false;
  auto add_ident = [&](CLI::App* s) {
    s->add_option("--homog", homog, "Homogeneity restrictions, e.g. eq1,eq2");
    s->add_flag("--tsls", ia.tsls, "Add the TSLS coefficients (3x3)");
    s->add_flag("--strict-estimands", strict_estimands, "Fail on weak denominators");
    s->add_option("--merge", ia.merge, "Pool instrument values: label=a,b (repeatable)");
  };
  auto* identify = app.add_subcommand("identify", "Identification from treatment-level moments");
  identify->add_option("--moments", moments_path, "Moments JSON")->required()->check(CLI::ExistingFile);
  identify->add_option("--design", design, "2xT or 3x3")->required()->check(CLI::IsMember({"2xT", "3x3"}));
  identify->add_option("--min-denominator", ia.min_denominator, "Weak-denominator threshold");
  add_ident(identify);
  add_common(identify);

  auto* identify_f = app.add_subcommand("identify-filtered", "Identification from observed-treatment moments");
  identify_f->add_option("--moments", moments_path, "Moments JSON")->required()->check(CLI::ExistingFile);
  identify_f->add_option("--design", design, "m1, m3, 3x2, factorial or star")
      ->required()
      ->check(CLI::IsMember(filtered_designs()));
  identify_f->add_option("--min-denominator", ia.min_denominator, "Weak-denominator threshold");
  identify_f->add_flag("--strict-estimands", strict_estimands, "Fail on weak denominators");
  identify_f->add_option("--merge", ia.merge, "Pool instrument values: label=a,b (repeatable)");
  add_common(identify_f);

  EstimateArgs ea;
  ea.ident.min_denominator = 0.01;
  std::string cluster_col, by_col, treat_list, instr_list, roles_z, roles_t;
  auto* estimate = app.add_subcommand("estimate", "Estimates with bootstrap intervals from micro-data");
  estimate->add_option("--data", data_path, "CSV with a header row")->required()->check(CLI::ExistingFile);
  estimate->add_option("--design", design, "Design tag")->required()->check(CLI::IsMember(all_designs()));
  estimate->add_option("--boot", ea.boot, "Bootstrap replicates")->check(CLI::Range(2, 1000000));
  estimate->add_option("--seed", seed, "Random seed")->required();
  estimate->add_option("--cluster", cluster_col, "Cluster column; resample whole clusters");
  estimate->add_option("--by", by_col, "Covariate cell column; full pipeline per cell");
  estimate->add_option("--y", ea.schema.y, "Outcome column");
  estimate->add_option("--arm", ea.schema.arm, "Treatment column");
  estimate->add_option("--z", ea.schema.z, "Instrument column");
  estimate->add_option("--treatments", treat_list, "Treatment labels in order");
  estimate->add_option("--reference", ea.reference, "Untreated label");
  estimate->add_option("--instruments", instr_list, "Instrument labels in order");
  estimate->add_option("--roles-z", roles_z, "Instrument roles, comma separated");
  estimate->add_option("--roles-t", roles_t, "Treatment roles, comma separated");
  estimate->add_option("--min-first-stage", ea.ident.min_denominator, "Weak-denominator threshold");
  estimate->add_option("--level", ea.level, "Interval coverage")->check(CLI::Range(0.0, 1.0));
  add_ident(estimate);
  add_common(estimate);

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "Conformance run against the simulation oracle");
  validate->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  validate->add_option("--errors", errors_path, "Error law JSON")->check(CLI::ExistingFile);
  validate->add_option("--outcomes", outcomes_path, "Outcome model JSON")->check(CLI::ExistingFile);
  validate->add_option("--n", va.n, "Number of units")->check(CLI::PositiveNumber);
  validate->add_option("--seed", seed, "Random seed")->required();
  validate->add_option("--tol", va.tol, "Relative tolerance");
  add_common(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  ia.homog = split_list(homog);
  ia.strict_estimands = strict_estimands;
  ia.design = design;
  try {
    json result;
    int code = kOk;
    if (simulate->parsed()) {
      sim.seed = seed;
      sim.threads = threads;
      result = run_simulate(read_json_file(model_path), optional_file(errors_path),
                            optional_file(outcomes_path), sim);
    } else if (enumerate->parsed()) {
      result = run_enumerate(read_json_file(model_path), regime);
    } else if (identify->parsed() || identify_f->parsed()) {
      result = run_identify(read_json_file(moments_path), ia);
    } else if (estimate->parsed()) {
      if (!cluster_col.empty()) ea.schema.cluster = cluster_col;
      if (!by_col.empty()) ea.schema.cell = by_col;
      ea.ident = IdentifyArgs{design, ia.homog, ia.tsls, strict_estimands, ea.ident.min_denominator, ia.merge};
      ea.treatments = split_list(treat_list);
      ea.instruments = split_list(instr_list);
      ea.roles_z = split_list(roles_z);
      ea.roles_t = split_list(roles_t);
      ea.seed = seed;
      ea.threads = threads;
      if (verbose) std::cerr << "loading " << data_path << "\n";
      auto d = load_dataset(data_path, ea.schema);
      result = run_estimate(d, ea);
    } else if (validate->parsed()) {
      va.seed = seed;
      va.threads = threads;
      result = run_validate(read_json_file(model_path), optional_file(errors_path),
                            optional_file(outcomes_path), va);
      if (!result["passed"].get<bool>()) code = kCheckFailed;
    }
    write_json(result, out);
    return code;
  } catch (const ParseError& e) {
    return emit_error(out, "ParseError", e.what(), kParse);
  } catch (const WeakIdentification& e) {
    return emit_error(out, "WeakIdentification", e.what(), kWeak);
  } catch (const AssumptionViolated& e) {
    return emit_error(out, "AssumptionViolated", e.what(), kAssumption);
  } catch (const DesignViolated& e) {
    return emit_error(out, "DesignViolated", e.what(), kAssumption);
  } catch (const RankDeficient& e) {
    return emit_error(out, "RankDeficient", e.what(), kAssumption);
  } catch (const InvalidModel& e) {
    return emit_error(out, "InvalidModel", e.what(), kParse);
  } catch (const Error& e) {
    return emit_error(out, "InvalidInput", e.what(), kUsage);
  }
}
