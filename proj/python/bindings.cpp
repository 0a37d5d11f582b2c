#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "catparc/aa_level.hpp"
#include "catparc/baselines.hpp"
#include "catparc/bench.hpp"
#include "catparc/distributions.hpp"
#include "catparc/error.hpp"
#include "catparc/features.hpp"
#include "catparc/msa.hpp"
#include "catparc/pairwise.hpp"
#include "catparc/simulate.hpp"

namespace py = pybind11;
using namespace catparc;

namespace {

PairwiseOptions pair_options(double A, double C, bool weighted, unsigned threads) {
  PairwiseOptions o;
  o.penalty = {A, C};
  o.weighted = weighted;
  o.rank_by = weighted ? PValueKind::weighted : PValueKind::chisq;
  o.threads = threads;
  return o;
}

py::dict pair_dict(const PairResult& r) {
  py::dict d;
  d["i"] = r.position_i;
  d["j"] = r.position_j;
  d["d_i"] = r.d_i;
  d["d_j"] = r.d_j;
  d["T"] = r.statistic;
  d["df"] = r.df;
  d["p_chisq"] = r.p_chisq;
  d["p_weighted"] = r.p_weighted;
  d["bh_adj_p"] = r.bh_adj_p;
  d["refit_i"] = r.refit_i;
  d["refit_j"] = r.refit_j;
  d["failed"] = r.failed;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Partial-correlation tests between categorical alignment columns";
  m.attr("__version__") = CATPARC_VERSION;

  auto error = py::register_exception<Error>(m, "CatparcError");
  py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<NumericError>(m, "NumericError", error.ptr());

  py::class_<Alignment>(m, "Alignment")
      .def_readonly("ids", &Alignment::ids)
      .def_readonly("sequences", &Alignment::sequences)
      .def_property_readonly("num_sequences", &Alignment::num_sequences)
      .def_property_readonly("num_positions", &Alignment::num_positions);
  m.def(
      "make_alignment", [](std::vector<std::string> rows) { return make_alignment(std::move(rows)); },
      py::arg("rows"));
  m.def("read_alignment", py::overload_cast<const std::string&>(&read_alignment_file), py::arg("path"));
  m.def("trim_rare_residues", &trim_rare_residues, py::arg("alignment"), py::arg("threshold"));

  py::class_<EncodedMatrix>(m, "EncodedMatrix")
      .def_readonly("x", &EncodedMatrix::x)
      .def_readonly("positions", &EncodedMatrix::positions)
      .def_readonly("dropped_positions", &EncodedMatrix::dropped_positions)
      .def_property_readonly("group_sizes",
                             [](const EncodedMatrix& e) {
                               std::vector<std::size_t> s;
                               for (const auto& g : e.groups) s.push_back(g.size);
                               return s;
                             })
      .def("residues_of", &EncodedMatrix::residues_of);
  m.def("encode", &encode_alignment, py::arg("alignment"));

  m.def(
      "test_all_pairs",
      [](const EncodedMatrix& enc, double A, double C, bool weighted, unsigned threads) {
        py::list out;
        for (const auto& r : test_all_pairs(enc, pair_options(A, C, weighted, threads))) out.append(pair_dict(r));
        return out;
      },
      py::arg("encoded"), py::arg("A") = 2.0, py::arg("C") = 0.07, py::arg("weighted") = false,
      py::arg("threads") = 1, "One dict per pair of encoded columns, most significant first.");

  m.def(
      "aa_pair",
      [](const EncodedMatrix& enc, std::size_t gi, std::size_t gj, double A, double C) {
        const auto cache = one_vs_rest_all(enc, {A, C});
        const auto aa = aa_pair_matrix(cache, enc, gi, gj);
        py::dict d;
        d["labels_i"] = aa.labels_i;
        d["labels_j"] = aa.labels_j;
        d["z"] = aa.z;
        d["p"] = aa.p;
        return d;
      },
      py::arg("encoded"), py::arg("group_i"), py::arg("group_j"), py::arg("A") = 2.0, py::arg("C") = 0.07);

  m.def(
      "weighted_chisq_tail",
      [](std::vector<double> weights, double x) { return weighted_chisq_tail(WeightedChiSq(std::move(weights)), x); },
      py::arg("weights"), py::arg("x"));
  m.def("chisq_tail", &chisq_tail, py::arg("df"), py::arg("x"));
  m.def("gumbel_cdf", &gumbel_cdf, py::arg("x"));

  m.def(
      "mutual_information",
      [](const Alignment& a, std::size_t i, std::size_t j, double pseudocount) {
        return mutual_information(a, i, j, pseudocount).value;
      },
      py::arg("alignment"), py::arg("i"), py::arg("j"), py::arg("pseudocount") = 0.5);

  m.def(
      "latent_gaussian",
      [](std::size_t u, std::size_t h, std::size_t n, double r, std::uint64_t seed) {
        LatentGaussianDesign d;
        d.u = u, d.h = h, d.n = n, d.r = r, d.seed = seed;
        return latent_gaussian_generator(d);
      },
      py::arg("u"), py::arg("h"), py::arg("n"), py::arg("r") = 0.0, py::arg("seed") = 1);
  m.def(
      "permute_groups", &permute_groups, py::arg("alignment"), py::arg("u"), py::arg("h"), py::arg("seed"));

  m.def(
      "auc",
      [](const std::vector<double>& scores, const std::vector<bool>& labels) { return roc_curve(scores, labels).auc; },
      py::arg("scores"), py::arg("labels"));
  m.def("spearman", &spearman, py::arg("x"), py::arg("y"));
}
