#include <map>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "uidpipe/cc_extract.hpp"
#include "uidpipe/corpus.hpp"
#include "uidpipe/design.hpp"
#include "uidpipe/error.hpp"
#include "uidpipe/glmm/glmm.hpp"
#include "uidpipe/ml/cv.hpp"
#include "uidpipe/ml/lasso.hpp"
#include "uidpipe/ml/metrics.hpp"
#include "uidpipe/ml/pca.hpp"
#include "uidpipe/pipeline/pipeline.hpp"
#include "uidpipe/report/binned_density.hpp"

namespace py = pybind11;
using namespace uidpipe;

namespace {

py::dict parse_conllu_py(const std::string& text) {
  const Corpus c = parse_conllu_string(text);
  py::dict convs;
  for (const auto& [id, conv] : c.conversations) {
    py::list utts;
    for (const auto& u : conv) {
      py::list toks;
      for (const auto& t : u.tokens)
        toks.append(py::make_tuple(t.index, t.form, t.lemma, t.upos, t.head, t.deprel));
      py::dict ud;
      ud["speaker"] = u.speaker_id;
      ud["utterance_index"] = u.utterance_index;
      ud["tokens"] = toks;
      utts.append(ud);
    }
    convs[py::str(id)] = utts;
  }
  py::dict out;
  out["conversations"] = convs;
  out["utterances"] = c.utterance_count();
  out["tokens"] = c.token_count();
  out["conllu"] = to_conllu_string(c);
  return out;
}

std::map<std::string, std::string> subcat_percentages_py(
    const std::vector<std::tuple<std::string, std::size_t, std::size_t>>& counts) {
  std::map<std::string, std::string> out;
  for (const auto& [lemma, e] : subcat_from_counts(counts).rows) out[lemma] = SubcatTable::percentage(e);
  return out;
}

ml::TrainConfig train_config(const py::dict& d) {
  ml::TrainConfig c;
  if (d.contains("hidden_sizes")) c.hidden_sizes = d["hidden_sizes"].cast<std::vector<int>>();
  if (d.contains("dropout")) c.dropout = d["dropout"].cast<double>();
  if (d.contains("learning_rate")) c.learning_rate = d["learning_rate"].cast<double>();
  if (d.contains("weight_decay")) c.weight_decay = d["weight_decay"].cast<double>();
  if (d.contains("batch_size")) c.batch_size = d["batch_size"].cast<int>();
  if (d.contains("max_epochs")) c.max_epochs = d["max_epochs"].cast<int>();
  if (d.contains("patience")) c.patience = d["patience"].cast<int>();
  if (d.contains("folds")) c.folds = d["folds"].cast<int>();
  if (d.contains("seed")) c.seed = d["seed"].cast<std::uint64_t>();
  c.validate();
  return c;
}

py::dict train_mlp_cv_py(const Eigen::MatrixXd& x, const std::vector<int>& y, const py::dict& cfg) {
  ml::CVOutput out;
  {
    py::gil_scoped_release release;
    out = ml::train_mlp_cv(x, y, train_config(cfg), false);
  }
  py::dict d;
  d["oof"] = out.cv.oof;
  d["fold_of"] = out.cv.fold_of;
  d["f1"] = out.cv.f1;
  d["log_loss"] = out.cv.log_loss;
  d["total_nll"] = out.cv.total_nll;
  d["k"] = out.cv.k;
  d["fold_f1"] = out.cv.fold_f1;
  d["fold_best_epoch"] = out.cv.fold_best_epoch;
  return d;
}

py::dict pca_py(const Eigen::MatrixXd& x, int k) {
  const auto m = ml::pca_fit(x, k);
  py::dict d;
  d["mean"] = m.mean;
  d["components"] = m.components;
  d["explained_variance_ratio"] = m.explained_variance_ratio;
  d["scores"] = ml::pca_transform(m, x);
  d["warnings"] = m.warnings;
  return d;
}

py::dict lasso_py(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<double> grid, std::uint64_t seed) {
  ml::LassoOptions opt;
  opt.seed = seed;
  const auto r = ml::lasso(x, y, grid, opt);
  py::dict d;
  d["coef"] = r.coef;
  d["intercept"] = r.intercept;
  d["lambda"] = r.lambda;
  d["selected"] = r.selected;
  d["lambda_grid"] = r.lambda_grid;
  d["cv_mse"] = r.cv_mse;
  return d;
}

py::tuple lasso_fixed_py(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
  const auto f = ml::lasso_fixed(x, y, lambda, {}, nullptr);
  return py::make_tuple(f.intercept, f.coef);
}

py::dict fit_glmm_py(const Eigen::MatrixXd& x, const std::vector<std::string>& names, const std::vector<int>& y,
                     const std::map<std::string, std::vector<std::string>>& groups) {
  std::vector<glmm::GroupingFactor> factors;
  for (const auto& [name, labels] : groups) factors.push_back(glmm::GroupingFactor::from_labels(name, labels));
  glmm::GLMMFit fit;
  {
    py::gil_scoped_release release;
    fit = glmm::fit_glmm(x, names, y, factors);
  }
  py::dict d;
  d["names"] = fit.names;
  d["beta"] = fit.beta;
  d["se"] = fit.se;
  d["theta"] = fit.theta;
  d["group_names"] = fit.group_names;
  d["loglik"] = fit.loglik;
  d["deviance"] = fit.deviance;
  d["aic"] = fit.aic;
  d["bic"] = fit.bic;
  d["converged"] = fit.converged;
  d["singular"] = fit.singular;
  d["warnings"] = fit.warnings;
  py::list rows;
  for (const auto& w : glmm::wald(fit))
    rows.append(py::make_tuple(w.term, w.estimate, w.se, w.z, w.p, w.p_text));
  d["wald"] = rows;
  return d;
}

std::map<std::string, double> gvif_py(const Eigen::MatrixXd& columns, const std::vector<std::string>& names,
                                      const std::vector<std::pair<std::string, std::vector<int>>>& groups) {
  std::map<std::string, double> out;
  for (const auto& r : glmm::gvif(columns, names, groups)) out[r.term] = r.gvif;
  return out;
}

py::dict binned_density_py(const std::vector<double>& density, const std::vector<int>& that, int bins) {
  const auto r = report::binned_density(density, that, bins);
  py::list b;
  for (const auto& x : r.bins) b.append(py::make_tuple(x.lo, x.hi, x.midpoint, x.count, x.that_count, x.proportion));
  py::dict d;
  d["bins"] = b;
  d["spearman"] = r.spearman ? py::object(py::float_(*r.spearman)) : py::object(py::none());
  d["warnings"] = r.warnings;
  return d;
}

std::vector<std::string> run_stage_py(const std::string& stage, const std::filesystem::path& config,
                                      std::optional<std::string> density_source, bool verb_intercept) {
  auto cfg = pipeline::load_config(config);
  if (density_source) cfg.density_source = pipeline::density_source_from_string(*density_source);
  if (verb_intercept) cfg.verb_intercept = true;
  pipeline::StageResult res;
  {
    py::gil_scoped_release release;
    res = pipeline::run_stage(pipeline::stage_from_string(stage), cfg);
  }
  std::vector<std::string> out;
  for (const auto& p : res.outputs) out.push_back(p.string());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "uidpipe core bindings";
  m.attr("__version__") = "0.1.0";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<DataError> data_error(m, "DataError", PyExc_ValueError);
  static py::exception<ConvergenceError> convergence_error(m, "ConvergenceError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const DataError& e) {
      py::set_error(data_error, e.what());
    } catch (const ConvergenceError& e) {
      py::set_error(convergence_error, e.what());
    }
  });

  m.def("parse_conllu", &parse_conllu_py, py::arg("text"),
        "Parses CoNLL-U text with conversation metadata into nested dicts.");
  m.def("subcat_percentages", &subcat_percentages_py, py::arg("counts"),
        "Maps (lemma, total, cc) rows to two-decimal percentage strings.");
  m.def("log_loss", [](const std::vector<double>& p, const std::vector<int>& y) { return ml::log_loss(p, y); });
  m.def("f1", [](const std::vector<double>& p, const std::vector<int>& y) { return ml::f1(p, y); });
  m.def("aic_bic", [](double nll, double k, double n) {
    const auto ic = ml::aic_bic(nll, k, n);
    return py::make_tuple(ic.aic, ic.bic);
  });
  m.def("surprisal", &ml::surprisal);
  m.def("successive_difference_contrasts", &successive_difference_contrasts, py::arg("levels"));
  m.def("pca", &pca_py, py::arg("x"), py::arg("k"));
  m.def("lasso", &lasso_py, py::arg("x"), py::arg("y"), py::arg("grid") = std::vector<double>{},
        py::arg("seed") = 0);
  m.def("lasso_fixed", &lasso_fixed_py, py::arg("x"), py::arg("y"), py::arg("lam"));
  m.def("train_mlp_cv", &train_mlp_cv_py, py::arg("x"), py::arg("y"), py::arg("config") = py::dict());
  m.def("fit_glmm", &fit_glmm_py, py::arg("x"), py::arg("names"), py::arg("y"), py::arg("groups"));
  m.def("gvif", &gvif_py, py::arg("columns"), py::arg("names"), py::arg("groups"));
  m.def("binned_density", &binned_density_py, py::arg("density"), py::arg("that_present"), py::arg("bins") = 10);
  m.def("run_stage", &run_stage_py, py::arg("stage"), py::arg("config"), py::arg("density_source") = py::none(),
        py::arg("verb_intercept") = false);
}
