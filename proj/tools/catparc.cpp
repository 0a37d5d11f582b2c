// catparc command-line front end.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include "catparc/aa_level.hpp"
#include "catparc/baselines.hpp"
#include "catparc/bench.hpp"
#include "catparc/error.hpp"
#include "catparc/features.hpp"
#include "catparc/msa.hpp"
#include "catparc/pairwise.hpp"
#include "catparc/parallel.hpp"
#include "catparc/simulate.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace catparc::cli {
namespace {

constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitUsage = 64;

struct InputOptions {
  std::string msa;
  std::string format = "auto";
  double max_gap_frac = 1.0;
  double trim = 0.0;
  std::size_t first = 0;
  std::size_t last = 0;

  void add(CLI::App* app, bool required = true) {
    auto* opt = app->add_option("--msa", msa, "Alignment file (FASTA, Stockholm or raw rows)");
    if (required) opt->required();
    app->add_option("--format", format, "auto | fasta | stockholm | raw")->capture_default_str();
    app->add_option("--max-gap-frac", max_gap_frac, "Drop sequences with a larger gap fraction")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--trim", trim, "Remove sequences carrying residues rarer than this (0: off)")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--first", first, "First alignment column kept (1-based, 0: start)");
    app->add_option("--last", last, "Last alignment column kept (1-based, inclusive, 0: end)");
  }

  json to_json() const {
    return {{"msa", msa},     {"format", format}, {"max_gap_frac", max_gap_frac},
            {"trim", trim},   {"first", first},   {"last", last}};
  }
};

struct ModelOptions {
  double a = 2.0;
  double c = 0.07;
  bool tune_c = false;
  double tune_frac = 0.1;
  std::size_t tune_folds = 5;
  double tol = 1e-6;
  int max_iter = 1000;

  void add(CLI::App* app) {
    app->add_option("--A", a, "Penalty constant A")->capture_default_str();
    app->add_option("--C", c, "Penalty constant C")->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_flag("--tune-c", tune_c, "Choose C by cross-validation on a subset of regressions");
    app->add_option("--tune-frac", tune_frac, "Share of positions used when tuning C")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--tune-folds", tune_folds, "Cross-validation folds for --tune-c")->capture_default_str();
    app->add_option("--tol", tol, "Group Lasso convergence tolerance")->capture_default_str();
    app->add_option("--max-iter", max_iter, "Group Lasso sweep limit")->capture_default_str();
  }

  json to_json() const {
    return {{"A", a},           {"C", c},       {"tune_c", tune_c}, {"tune_frac", tune_frac},
            {"tune_folds", tune_folds}, {"tol", tol}, {"max_iter", max_iter}};
  }
};

Alignment load_alignment(const InputOptions& in, RunManifest& manifest) {
  manifest.add_input(in.msa);
  manifest.start("read");
  Alignment a = in.format == "auto" ? read_alignment_file(in.msa)
                                    : read_alignment_file(in.msa, parse_msa_format(in.format));
  if (a.unknown_symbols > 0)
    manifest.warn(fmt::format("{} symbols outside the residue alphabet were read as gaps", a.unknown_symbols));
  if (in.first > 0 || in.last > 0) {
    const std::size_t first = in.first > 0 ? in.first - 1 : 0;
    const std::size_t last = in.last > 0 ? in.last : a.num_positions();
    if (first >= last || last > a.num_positions())
      throw InputError(fmt::format("column range {}..{} is outside the alignment (1..{})", first + 1, last,
                                   a.num_positions()));
    a = slice_positions(a, first, last);
  }
  const std::size_t rows = a.num_sequences();
  if (in.max_gap_frac < 1.0) a = filter_gap_fraction(a, in.max_gap_frac);
  if (in.trim > 0.0) a = trim_rare_residues(a, in.trim);
  if (a.num_sequences() < rows)
    manifest.warn(fmt::format("{} of {} sequences removed by gap filtering and trimming",
                              rows - a.num_sequences(), rows));
  manifest.stop("read");
  return a;
}

EncodedMatrix encode(const Alignment& a, RunManifest& manifest) {
  manifest.start("encode");
  EncodedMatrix enc = encode_alignment(a);
  manifest.stop("encode");
  if (!enc.dropped_positions.empty())
    manifest.warn(fmt::format("{} alignment columns carry no variable residue and were dropped",
                              enc.dropped_positions.size()));
  manifest.note("encoding", {{"sequences", enc.num_rows()},
                             {"positions", enc.num_groups()},
                             {"columns", enc.num_columns()},
                             {"dropped_positions", enc.dropped_positions.size()}});
  return enc;
}

ResidualCache build_cache(const EncodedMatrix& enc, const ModelOptions& model, unsigned threads,
                          std::uint64_t seed, RunManifest& manifest) {
  GroupPenaltySpec spec{model.a, model.c};
  const FitOptions fit{model.tol, model.max_iter};
  if (model.tune_c) {
    manifest.start("tune_c");
    TuneOptions t;
    t.fraction = model.tune_frac;
    t.folds = model.tune_folds;
    t.seed = seed;
    t.threads = threads;
    const TuneResult tuned = tune_c(enc, spec, t, fit);
    spec.C = tuned.c;
    manifest.stop("tune_c");
    json responses = json::array();
    for (std::size_t r : tuned.responses) responses.push_back(enc.positions[r] + 1);
    manifest.note("tune_c", {{"C", tuned.c}, {"grid", t.grid}, {"responses", responses}, {"chosen", tuned.chosen}});
  }
  manifest.start("one_vs_rest");
  ResidualCache cache = one_vs_rest_all(enc, spec, fit, threads);
  manifest.stop("one_vs_rest");
  for (std::size_t g = 0; g < cache.num_groups(); ++g)
    if (!cache.ok(g)) manifest.warn(cache.failures[g]);
  return cache;
}

fs::path prepare_dir(const std::string& out) {
  const fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

void write_output(RunManifest& manifest, const fs::path& path,
                  const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  body(out);
  out.close();
  if (!out) throw DataError(fmt::format("error writing {}", path.string()));
  manifest.add_output(path);
}

void print_warnings(const RunManifest& manifest) {
  for (const auto& w : manifest.warnings()) fmt::print(std::cerr, "warning: {}\n", w);
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw InputError(fmt::format("pair '{}' should look like i,j", text));
  try {
    return {std::stoul(text.substr(0, comma)), std::stoul(text.substr(comma + 1))};
  } catch (const std::logic_error&) {
    throw InputError(fmt::format("pair '{}' should look like i,j", text));
  }
}

std::size_t group_for_column(const EncodedMatrix& enc, std::size_t column_1based) {
  if (column_1based == 0 || column_1based > enc.alignment_length)
    throw InputError(fmt::format("column {} is outside the alignment", column_1based));
  const std::size_t g = enc.group_of_position(column_1based - 1);
  if (g == EncodedMatrix::npos)
    throw InputError(fmt::format("column {} was dropped from the encoding", column_1based));
  return g;
}

// ---------------------------------------------------------------- encode

struct EncodeCommand {
  InputOptions input;
  std::string out;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("encode", "One-hot encode and standardize an alignment");
    input.add(cmd);
    cmd->add_option("--out", out, "Output directory")->required();
  }

  int run() {
    RunManifest manifest("encode");
    manifest.set_options({{"input", input.to_json()}, {"out", out}});
    const fs::path dir = prepare_dir(out);
    const Alignment a = load_alignment(input, manifest);
    const EncodedMatrix enc = encode(a, manifest);
    write_output(manifest, dir / "encoded.tsv", [&](std::ostream& o) { write_encoded_tsv(o, enc); });
    write_output(manifest, dir / "encoded.json",
                 [&](std::ostream& o) { o << encoded_sidecar(enc).dump(2) << '\n'; });
    manifest.write(dir);
    print_warnings(manifest);
    fmt::print("{} sequences, {} positions, {} columns\n", enc.num_rows(), enc.num_groups(), enc.num_columns());
    return 0;
  }
};

// ---------------------------------------------------------------- contacts

struct ContactsCommand {
  InputOptions input;
  ModelOptions model;
  std::string out;
  double alpha = 0.05;
  std::string tail = "chisq";
  std::string tail_approx = "inversion";
  bool weighted = false;
  double k = 0.0;
  unsigned threads = 0;
  std::uint64_t seed = 1;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("contacts", "Test every pair of positions for partial correlation");
    input.add(cmd);
    model.add(cmd);
    cmd->add_option("--out", out, "Output directory")->required();
    cmd->add_option("--alpha", alpha, "Level for calling a contact (p <= alpha)")->capture_default_str();
    cmd->add_option("--tail", tail, "p-value that orders the table")
        ->check(CLI::IsMember({"chisq", "weighted"}))
        ->capture_default_str();
    cmd->add_option("--tail-approx", tail_approx, "Weighted chi-squared tail method")
        ->check(CLI::IsMember({"inversion", "satterthwaite"}))
        ->capture_default_str();
    cmd->add_flag("--weighted", weighted, "Also compute weighted chi-squared p-values");
    cmd->add_option("--K", k, "Write graph.tsv with edges T >= K log m (0: skip)")->capture_default_str();
    cmd->add_option("--threads", threads, "Worker threads (0: CATPARC_THREADS or all cores)");
    cmd->add_option("--seed", seed, "Seed for --tune-c")->capture_default_str();
  }

  int run() {
    RunManifest manifest("contacts");
    const unsigned workers = resolve_threads(threads);
    manifest.set_options({{"input", input.to_json()}, {"model", model.to_json()}, {"alpha", alpha},
                          {"tail", tail}, {"tail_approx", tail_approx}, {"weighted", weighted},
                          {"K", k}, {"threads", workers}, {"out", out}});
    manifest.set_seed(seed);
    const fs::path dir = prepare_dir(out);
    const Alignment a = load_alignment(input, manifest);
    const EncodedMatrix enc = encode(a, manifest);
    const ResidualCache cache = build_cache(enc, model, workers, seed, manifest);

    PairwiseOptions opts;
    opts.penalty = cache.penalty;
    opts.fit = cache.fit_options;
    opts.rank_by = tail == "weighted" ? PValueKind::weighted : PValueKind::chisq;
    opts.weighted = weighted || opts.rank_by == PValueKind::weighted;
    opts.tail = tail_approx == "satterthwaite" ? TailMethod::satterthwaite : TailMethod::inversion;
    opts.threads = workers;
    manifest.start("pairs");
    const auto results = test_all_pairs(cache, enc, opts);
    manifest.stop("pairs");

    std::size_t failed = 0, unstable = 0, called = 0;
    for (const auto& r : results) {
      failed += r.failed;
      unstable += !r.failed && r.unstable;
      called += !r.failed && r.pvalue(opts.rank_by) <= alpha;
    }
    if (failed > 0) manifest.warn(fmt::format("{} pairs failed and are left out of pairs.tsv", failed));
    if (unstable > 0) manifest.warn(fmt::format("{} pairs flagged unstable", unstable));
    manifest.note("summary", {{"pairs", results.size()}, {"failed", failed}, {"unstable", unstable},
                              {"called_at_alpha", called}, {"C", cache.penalty.C}});

    write_output(manifest, dir / "pairs.tsv", [&](std::ostream& o) { write_pair_tsv(o, results); });
    write_output(manifest, dir / "rankings.tsv",
                 [&](std::ostream& o) { write_rankings_tsv(o, catparc_rankings(results)); });
    if (k > 0.0) {
      const auto edges = recover_graph(results, k, enc.num_groups());
      write_output(manifest, dir / "graph.tsv", [&](std::ostream& o) {
        o << "i\tj\n";
        for (auto [i, j] : edges) fmt::print(o, "{}\t{}\n", i + 1, j + 1);
      });
    }
    manifest.write(dir);
    print_warnings(manifest);
    fmt::print("{} pairs tested, {} with p <= {} ({} p-values)\n", results.size() - failed, called, alpha, tail);
    return 0;
  }
};

// ---------------------------------------------------------------- aa-pairs

struct AAPairsCommand {
  InputOptions input;
  ModelOptions model;
  std::string out;
  std::vector<std::string> pairs;
  std::size_t top_pairs = 0;
  double alpha = 0.05;
  std::string grouping_file;
  double p_cutoff = 0.05;
  std::size_t top_k = 20;
  unsigned threads = 0;
  std::uint64_t seed = 1;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("aa-pairs", "Residue-level tests inside position pairs");
    input.add(cmd);
    model.add(cmd);
    cmd->add_option("--out", out, "Output directory")->required();
    cmd->add_option("--pair", pairs, "Alignment columns i,j (1-based); repeatable");
    cmd->add_option("--top-pairs", top_pairs, "Also take the n strongest pairs with p_chisq <= alpha");
    cmd->add_option("--alpha", alpha, "Level for --top-pairs")->capture_default_str();
    cmd->add_option("--grouping", grouping_file, "Residue classes, one per line (default: 8 classes)");
    cmd->add_option("--p-cutoff", p_cutoff, "Cutoff for top_aa.tsv")->capture_default_str();
    cmd->add_option("--top-k", top_k, "Residue pairs kept per position pair in top_aa.tsv")->capture_default_str();
    cmd->add_option("--threads", threads, "Worker threads (0: CATPARC_THREADS or all cores)");
    cmd->add_option("--seed", seed, "Seed for --tune-c")->capture_default_str();
  }

  int run() {
    RunManifest manifest("aa-pairs");
    const unsigned workers = resolve_threads(threads);
    manifest.set_options({{"input", input.to_json()}, {"model", model.to_json()}, {"pairs", pairs},
                          {"top_pairs", top_pairs}, {"alpha", alpha}, {"grouping", grouping_file},
                          {"p_cutoff", p_cutoff}, {"top_k", top_k}, {"threads", workers}, {"out", out}});
    manifest.set_seed(seed);
    if (pairs.empty() && top_pairs == 0) throw InputError("give --pair or --top-pairs");
    const fs::path dir = prepare_dir(out);
    ResidueGrouping grouping = murphy8();
    if (!grouping_file.empty()) {
      manifest.add_input(grouping_file);
      std::ifstream in(grouping_file);
      grouping = read_grouping(in);
    }
    const Alignment a = load_alignment(input, manifest);
    const EncodedMatrix enc = encode(a, manifest);
    const ResidualCache cache = build_cache(enc, model, workers, seed, manifest);

    std::vector<std::pair<std::size_t, std::size_t>> targets;
    for (const auto& text : pairs) {
      const auto [i, j] = parse_pair(text);
      const std::size_t gi = group_for_column(enc, i), gj = group_for_column(enc, j);
      if (gi == gj) throw InputError(fmt::format("pair {} names one column twice", text));
      targets.emplace_back(gi, gj);
    }
    if (top_pairs > 0) {
      PairwiseOptions opts;
      opts.penalty = cache.penalty;
      opts.fit = cache.fit_options;
      opts.threads = workers;
      manifest.start("pairs");
      const auto results = test_all_pairs(cache, enc, opts);
      manifest.stop("pairs");
      std::size_t taken = 0;
      for (const auto& r : results) {
        if (taken == top_pairs || r.failed || !(r.p_chisq <= alpha)) break;
        const auto key = std::minmax(r.i, r.j);
        if (std::find_if(targets.begin(), targets.end(), [&](auto t) { return std::minmax(t.first, t.second) == key; }) ==
            targets.end())
          targets.emplace_back(key.first, key.second);
        ++taken;
      }
    }

    std::vector<AAPairMatrix> matrices(targets.size());
    manifest.start("aa");
    parallel_for(targets.size(), workers,
                 [&](std::size_t t) { matrices[t] = aa_pair_matrix(cache, enc, targets[t].first, targets[t].second); });
    manifest.stop("aa");

    std::ostringstream top;
    top << "i\tj\tres_i\tres_j\tz\tp\n";
    for (const auto& aa : matrices) {
      const std::size_t i = aa.position_i + 1, j = aa.position_j + 1;
      if (!aa.missing.empty())
        manifest.warn(fmt::format("pair {},{}: {} residue combinations have no variance", i, j, aa.missing.size()));
      write_output(manifest, dir / fmt::format("aa_{}_{}.tsv", i, j), [&](std::ostream& o) { write_aa_tsv(o, aa); });
      write_output(manifest, dir / fmt::format("groups_{}_{}.tsv", i, j),
                   [&](std::ostream& o) { write_group_strength_tsv(o, aa_group_strength(aa, grouping)); });
      for (const auto& e : top_aa_pairs(aa, p_cutoff, top_k))
        fmt::print(top, "{}\t{}\t{}\t{}\t{:.10g}\t{:.10g}\n", i, j, e.residue_i, e.residue_j, e.z, e.p);
    }
    write_output(manifest, dir / "top_aa.tsv", [&](std::ostream& o) { o << top.str(); });
    manifest.write(dir);
    print_warnings(manifest);
    fmt::print("{} position pairs written\n", matrices.size());
    return 0;
  }
};

// ---------------------------------------------------------------- baselines

struct BaselinesCommand {
  InputOptions input;
  ModelOptions model;
  std::string out;
  std::vector<std::string> methods{"MI", "PSICOV", "L2", "Linf"};
  bool with_catparc = false;
  double glasso_rho = 0.01;
  double pseudocount = 0.5;
  std::string tail_approx = "inversion";
  unsigned threads = 0;
  std::uint64_t seed = 1;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("baselines", "Score every pair with the comparison methods");
    input.add(cmd);
    model.add(cmd);
    cmd->add_option("--out", out, "Output directory")->required();
    cmd->add_option("--methods", methods, "Comma list of MI, PSICOV, L2, Linf")
        ->delimiter(',')
        ->check(CLI::IsMember({"MI", "PSICOV", "L2", "Linf"}))
        ->capture_default_str();
    cmd->add_flag("--catparc", with_catparc, "Append CATParc rows to the same table");
    cmd->add_option("--glasso-rho", glasso_rho, "Graphical Lasso penalty for PSICOV")->capture_default_str();
    cmd->add_option("--pseudocount", pseudocount, "MI pseudocount per cell")->capture_default_str();
    cmd->add_option("--tail-approx", tail_approx, "Tail method for the L2 reference")
        ->check(CLI::IsMember({"inversion", "satterthwaite"}))
        ->capture_default_str();
    cmd->add_option("--threads", threads, "Worker threads (0: CATPARC_THREADS or all cores)");
    cmd->add_option("--seed", seed, "Seed for --tune-c")->capture_default_str();
  }

  int run() {
    RunManifest manifest("baselines");
    const unsigned workers = resolve_threads(threads);
    manifest.set_options({{"input", input.to_json()}, {"model", model.to_json()}, {"methods", methods},
                          {"catparc", with_catparc}, {"glasso_rho", glasso_rho}, {"pseudocount", pseudocount},
                          {"tail_approx", tail_approx}, {"threads", workers}, {"out", out}});
    manifest.set_seed(seed);
    const fs::path dir = prepare_dir(out);
    const Alignment a = load_alignment(input, manifest);
    const EncodedMatrix enc = encode(a, manifest);
    const ResidualCache cache = build_cache(enc, model, workers, seed, manifest);
    auto has = [&](const char* m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
    BaselineOptions opts;
    opts.mi = has("MI");
    opts.psicov = has("PSICOV");
    opts.l2 = has("L2");
    opts.linf = has("Linf");
    opts.glasso_rho = glasso_rho;
    opts.mi_pseudocount = pseudocount;
    opts.threads = workers;
    opts.tail = tail_approx == "satterthwaite" ? TailMethod::satterthwaite : TailMethod::inversion;
    manifest.start("baselines");
    auto rows = baseline_rankings(a, enc, cache, opts);
    manifest.stop("baselines");
    if (with_catparc) {
      PairwiseOptions popts;
      popts.penalty = cache.penalty;
      popts.fit = cache.fit_options;
      popts.threads = workers;
      manifest.start("pairs");
      const auto extra = catparc_rankings(test_all_pairs(cache, enc, popts));
      manifest.stop("pairs");
      rows.insert(rows.end(), extra.begin(), extra.end());
    }
    write_output(manifest, dir / "rankings.tsv", [&](std::ostream& o) { write_rankings_tsv(o, rows); });
    manifest.write(dir);
    print_warnings(manifest);
    fmt::print("{} ranking rows written\n", rows.size());
    return 0;
  }
};

// ---------------------------------------------------------------- simulate

JointTable read_joint_table(const json& j) {
  JointTable t;
  t.outcomes = j.at("outcomes").get<std::vector<std::string>>();
  t.probabilities = j.at("probabilities").get<std::vector<double>>();
  return t;
}

struct SimulateCommand {
  std::string mode = "latent";
  std::string out;
  std::size_t u = 6, h = 5, n = 2000, m = 30;
  std::size_t replicates = 1;
  std::uint64_t seed = 1;
  double r = 0.0;
  std::vector<double> cuts{1.0 / 3.0, 2.0 / 3.0};
  InputOptions source;
  std::string tables;
  FamilyDesign family;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("simulate", "Generate alignments with known group truth");
    // --h is the group size, so help is long-form only here.
    cmd->set_help_flag("--help", "Print this help message and exit");
    cmd->add_option("--mode", mode, "permute | latent | multinomial | family")
        ->check(CLI::IsMember({"permute", "latent", "multinomial", "family"}))
        ->capture_default_str();
    cmd->add_option("--out", out, "Output directory")->required();
    cmd->add_option("--u", u, "Number of groups")->capture_default_str();
    cmd->add_option("--h", h, "Positions per group")->capture_default_str();
    cmd->add_option("--n", n, "Sequences (latent, multinomial, family)")->capture_default_str();
    cmd->add_option("--m", m, "Columns of the synthetic family before permutation")->capture_default_str();
    cmd->add_option("--replicates", replicates, "Datasets to write, seeds seed..seed+R-1")->capture_default_str();
    cmd->add_option("--seed", seed, "Base seed")->capture_default_str();
    cmd->add_option("--r", r, "Within-group latent correlation (latent)")->capture_default_str();
    cmd->add_option("--cuts", cuts, "Increasing normal quantiles cutting each latent (latent)")->delimiter(',');
    cmd->add_option("--source", source.msa, "Source alignment (permute)");
    cmd->add_option("--format", source.format, "Source format")->capture_default_str();
    cmd->add_option("--trim", source.trim, "Trim threshold applied to the source (permute)")->capture_default_str();
    cmd->add_option("--first", source.first, "First source column kept (1-based)");
    cmd->add_option("--last", source.last, "Last source column kept (1-based, inclusive)");
    cmd->add_option("--tables", tables, "JSON list of {outcomes, probabilities} (multinomial)");
    cmd->add_option("--bandwidth", family.bandwidth, "Family: precision bandwidth")->capture_default_str();
    cmd->add_option("--coupling-min", family.coupling_min, "Family: smallest coupling")->capture_default_str();
    cmd->add_option("--coupling-max", family.coupling_max, "Family: largest coupling")->capture_default_str();
    cmd->add_option("--long-range", family.long_range_edges, "Family: long-range couplings")->capture_default_str();
    cmd->add_option("--min-categories", family.min_categories, "Family: fewest residues per column")
        ->capture_default_str();
    cmd->add_option("--max-categories", family.max_categories, "Family: most residues per column")
        ->capture_default_str();
    cmd->add_option("--skew", family.skew, "Family: residue frequency skew")->capture_default_str();
    cmd->add_option("--gapped-fraction", family.gapped_fraction, "Family: share of columns with gaps")
        ->capture_default_str();
  }

  int run() {
    RunManifest manifest("simulate");
    json opts = {{"mode", mode}, {"u", u}, {"h", h}, {"n", n}, {"replicates", replicates}, {"out", out}};
    if (mode == "latent") opts.update({{"r", r}, {"cuts", cuts}});
    if (mode == "permute") opts["source"] = source.to_json();
    if (mode == "multinomial") opts["tables"] = tables;
    if (mode == "family")
      opts.update({{"m", m},
                   {"bandwidth", family.bandwidth},
                   {"coupling_min", family.coupling_min},
                   {"coupling_max", family.coupling_max},
                   {"long_range", family.long_range_edges},
                   {"min_categories", family.min_categories},
                   {"max_categories", family.max_categories},
                   {"skew", family.skew},
                   {"gapped_fraction", family.gapped_fraction}});
    manifest.set_options(opts);
    manifest.set_seed(seed);
    if (replicates == 0) throw InputError("--replicates must be at least 1");
    const fs::path dir = prepare_dir(out);

    std::optional<Alignment> src;
    if (mode == "permute") {
      if (source.msa.empty()) throw InputError("--mode permute needs --source");
      src = load_alignment(source, manifest);
      if (src->num_positions() < u * h)
        throw InputError(fmt::format("source keeps {} columns, u*h = {}", src->num_positions(), u * h));
    }
    std::vector<JointTable> joint;
    if (mode == "multinomial") {
      if (tables.empty()) throw InputError("--mode multinomial needs --tables");
      manifest.add_input(tables);
      std::ifstream in(tables);
      try {
        const json j = json::parse(in);
        for (const auto& t : j) joint.push_back(read_joint_table(t));
      } catch (const json::exception& e) {
        throw FormatError(fmt::format("{}: {}", tables, e.what()));
      }
    }

    manifest.start("simulate");
    for (std::size_t k = 0; k < replicates; ++k) {
      const std::uint64_t s = seed + k;
      Alignment a;
      if (mode == "permute") {
        a = permute_groups(*src, u, h, s);
      } else if (mode == "latent") {
        LatentGaussianDesign d;
        d.u = u, d.h = h, d.n = n, d.r = r, d.cut_quantiles = cuts, d.seed = s;
        a = latent_gaussian_generator(d);
      } else if (mode == "multinomial") {
        MultinomialDesign d;
        d.u = u, d.h = h, d.n = n, d.tables = joint, d.seed = s;
        a = multinomial_generator(d);
      } else {
        FamilyDesign d = family;
        d.m = std::max(m, u * h), d.n = n, d.seed = s;
        a = permute_groups(synthetic_family(d), u, h, s ^ 0x9e3779b97f4a7c15ULL);
      }
      const std::string suffix = replicates == 1 ? "" : fmt::format("_{:03d}", k + 1);
      write_output(manifest, dir / fmt::format("alignment{}.fa", suffix), [&](std::ostream& o) { write_fasta(o, a); });
      write_output(manifest, dir / fmt::format("truth{}.tsv", suffix),
                   [&](std::ostream& o) { write_truth_tsv(o, group_truth(u, h)); });
    }
    manifest.stop("simulate");
    manifest.write(dir);
    print_warnings(manifest);
    fmt::print("{} dataset(s) written to {}\n", replicates, dir.string());
    return 0;
  }
};

// ---------------------------------------------------------------- bench

struct BenchCommand {
  std::vector<std::string> truth;
  std::vector<std::string> rankings;
  std::string out;
  double alpha = 0.05;
  std::size_t grid = 101;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("bench", "ROC, AUC, Type-I error and power from ranking files");
    cmd->add_option("--truth", truth, "Truth TSV: one shared, or one per rankings file")
        ->required();
    cmd->add_option("--rankings", rankings, "Rankings TSVs, one replicate each")->required();
    cmd->add_option("--out", out, "Output directory")->required();
    cmd->add_option("--alpha", alpha, "Level for Type-I error and power")->capture_default_str();
    cmd->add_option("--grid", grid, "FPR grid size of the median ROC")->capture_default_str();
  }

  int run() {
    RunManifest manifest("bench");
    manifest.set_options({{"truth", truth}, {"rankings", rankings}, {"alpha", alpha}, {"grid", grid}, {"out", out}});
    if (truth.size() != 1 && truth.size() != rankings.size())
      throw InputError("give one --truth file or one per rankings file");
    const fs::path dir = prepare_dir(out);
    std::map<std::string, std::vector<ReplicateMetrics>> per_method;
    std::ostringstream table;
    table << "replicate\tmethod\tauc\ttype1\tpower\n";
    auto num = [](double v) { return std::isnan(v) ? std::string("NA") : fmt::format("{:.6f}", v); };
    for (std::size_t k = 0; k < rankings.size(); ++k) {
      const std::string& tpath = truth[truth.size() == 1 ? 0 : k];
      manifest.add_input(tpath);
      manifest.add_input(rankings[k]);
      std::ifstream tin(tpath), rin(rankings[k]);
      const auto t = read_truth_tsv(tin);
      const auto rows = read_rankings_tsv(rin);
      for (auto& [method, metrics] : evaluate_rankings(rows, t, alpha)) {
        fmt::print(table, "{}\t{}\t{}\t{}\t{}\n", k + 1, method, num(metrics.auc), num(metrics.rates.type1),
                   num(metrics.rates.power));
        per_method[method].push_back(std::move(metrics));
      }
    }
    std::map<std::string, MethodSummary> summary;
    std::map<std::string, RocCurve> curves;
    for (const auto& [method, reps] : per_method) {
      summary[method] = median_summary(reps);
      std::vector<RocCurve> rocs;
      for (const auto& r : reps) rocs.push_back(r.roc);
      curves[method] = rocs.size() == 1 ? rocs.front() : median_roc(rocs, grid);
    }
    write_output(manifest, dir / "auc.tsv", [&](std::ostream& o) { o << table.str(); });
    write_output(manifest, dir / "roc.tsv", [&](std::ostream& o) { write_roc_tsv(o, curves); });
    write_output(manifest, dir / "summary.json",
                 [&](std::ostream& o) { o << summary_json(summary).dump(2) << '\n'; });
    manifest.write(dir);
    print_warnings(manifest);
    fmt::print("{:<10} {:>8} {:>8} {:>8} {:>5}\n", "method", "AUC", "type1", "power", "reps");
    for (const auto& [method, s] : summary)
      fmt::print("{:<10} {:>8} {:>8} {:>8} {:>5}\n", method, num(s.auc), num(s.type1), num(s.power), s.replicates);
    return 0;
  }
};

// ---------------------------------------------------------------- features

struct FeaturesCommand {
  InputOptions input;
  ModelOptions model;
  std::string out;
  std::string mutants;
  std::string wildtype;
  std::string wildtype_id = "WT";
  std::string method = "catparc";
  double screen_alpha = 0.0;
  double glasso_rho = 0.01;
  unsigned threads = 0;
  std::uint64_t seed = 1;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("features", "Coupling features for mutant sequences");
    input.add(cmd);
    model.add(cmd);
    cmd->add_option("--out", out, "Output directory")->required();
    cmd->add_option("--mutants", mutants, "CSV id,sequence[,effect]")->required();
    cmd->add_option("--wildtype", wildtype, "Wild-type sequence (aligned)");
    cmd->add_option("--wildtype-id", wildtype_id, "Row of --mutants holding the wild type")->capture_default_str();
    cmd->add_option("--method", method, "catparc (partial covariance) or psicov (precision blocks)")
        ->check(CLI::IsMember({"catparc", "psicov"}))
        ->capture_default_str();
    cmd->add_option("--screen-alpha", screen_alpha, "Keep only pairs with p_chisq < alpha (0: all pairs)")
        ->capture_default_str();
    cmd->add_option("--glasso-rho", glasso_rho, "Graphical Lasso penalty for --method psicov")->capture_default_str();
    cmd->add_option("--threads", threads, "Worker threads (0: CATPARC_THREADS or all cores)");
    cmd->add_option("--seed", seed, "Seed for --tune-c")->capture_default_str();
  }

  int run() {
    RunManifest manifest("features");
    const unsigned workers = resolve_threads(threads);
    manifest.set_options({{"input", input.to_json()}, {"model", model.to_json()}, {"mutants", mutants},
                          {"wildtype", wildtype}, {"wildtype_id", wildtype_id}, {"method", method},
                          {"screen_alpha", screen_alpha}, {"glasso_rho", glasso_rho}, {"threads", workers},
                          {"out", out}});
    manifest.set_seed(seed);
    const fs::path dir = prepare_dir(out);
    manifest.add_input(mutants);
    std::ifstream min(mutants);
    const auto rows = read_mutants_csv(min);
    std::string wt = wildtype;
    for (char& c : wt) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (wt.empty()) {
      const auto it = std::find_if(rows.begin(), rows.end(), [&](const Mutant& mt) { return mt.id == wildtype_id; });
      if (it == rows.end()) throw InputError(fmt::format("no --wildtype and no row with id '{}'", wildtype_id));
      wt = it->sequence;
    }

    const Alignment a = load_alignment(input, manifest);
    const EncodedMatrix enc = encode(a, manifest);
    std::optional<ResidualCache> cache;
    std::optional<PairScreen> screen;
    if (method == "catparc" || screen_alpha > 0.0) cache = build_cache(enc, model, workers, seed, manifest);
    if (screen_alpha > 0.0) {
      PairwiseOptions opts;
      opts.penalty = cache->penalty;
      opts.fit = cache->fit_options;
      opts.threads = workers;
      manifest.start("pairs");
      screen = screen_pairs(test_all_pairs(*cache, enc, opts), screen_alpha, PValueKind::chisq);
      manifest.stop("pairs");
    }
    manifest.start("map");
    PartialCovMap map;
    if (method == "catparc") {
      map = partial_cov_map(*cache, enc, screen, workers);
    } else {
      map = precision_map(graphical_lasso(enc, glasso_rho), enc, screen);
    }
    manifest.stop("map");
    if (map.failed_pairs > 0) manifest.warn(fmt::format("{} pairs failed and contribute 0", map.failed_pairs));

    manifest.start("score");
    const auto features = delta_features(rows, wt, map, workers);
    manifest.stop("score");
    std::size_t unseen = 0;
    for (const auto& f : features) unseen += f.unseen_count > 0;
    if (unseen > 0) manifest.warn(fmt::format("{} sequences carry residues unseen in the alignment", unseen));
    manifest.note("map", {{"method", map.method}, {"failed_pairs", map.failed_pairs},
                          {"screened_pairs", map.screened_pairs}});
    write_output(manifest, dir / "features.csv", [&](std::ostream& o) { write_features_csv(o, features); });

    std::vector<double> effect, dc, dm;
    for (std::size_t k = 0; k < rows.size(); ++k)
      if (rows[k].effect) {
        effect.push_back(*rows[k].effect);
        dc.push_back(features[k].delta_c);
        dm.push_back(features[k].delta_m);
      }
    if (effect.size() >= 2) {
      const double sc = spearman(dc, effect), sm = spearman(dm, effect);
      auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
      const json j = {{"n", effect.size()}, {"spearman_deltaC", num(sc)}, {"spearman_deltaM", num(sm)}};
      write_output(manifest, dir / "spearman.json", [&](std::ostream& o) { o << j.dump(2) << '\n'; });
      fmt::print("spearman(deltaC, effect) = {:.4f}\nspearman(deltaM, effect) = {:.4f}  (n = {})\n", sc, sm,
                 effect.size());
    }
    manifest.write(dir);
    print_warnings(manifest);
    fmt::print("{} feature rows written\n", features.size());
    return 0;
  }
};

}  // namespace
}  // namespace catparc::cli

int main(int argc, char** argv) {
  using namespace catparc::cli;
  CLI::App app{"Partial-correlation inference for categorical alignment data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CATPARC_VERSION);
  EncodeCommand encode;
  ContactsCommand contacts;
  AAPairsCommand aa_pairs;
  BaselinesCommand baselines;
  SimulateCommand simulate;
  BenchCommand bench;
  FeaturesCommand features;
  encode.add(app);
  contacts.add(app);
  aa_pairs.add(app);
  baselines.add(app);
  simulate.add(app);
  bench.add(app);
  features.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const auto* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    if (name == "encode") return encode.run();
    if (name == "contacts") return contacts.run();
    if (name == "aa-pairs") return aa_pairs.run();
    if (name == "baselines") return baselines.run();
    if (name == "simulate") return simulate.run();
    if (name == "bench") return bench.run();
    if (name == "features") return features.run();
    return kExitUsage;
  } catch (const catparc::DataError& e) {
    fmt::print(std::cerr, "data error: {}\n", e.what());
    return kExitData;
  } catch (const catparc::NumericError& e) {
    fmt::print(std::cerr, "numeric error: {}\n", e.what());
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    fmt::print(std::cerr, "data error: {}\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return 1;
  }
}
