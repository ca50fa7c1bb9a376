#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

#include "hiloc/pipeline.hpp"

namespace py = pybind11;
using namespace hiloc;

namespace {

py::dict metrics_dict(const eval::MetricsReport& m) {
    py::dict d;
    d["building_hit_rate"] = m.building_hit_rate;
    d["floor_hit_rate"] = m.floor_hit_rate;
    d["success_rate"] = m.success_rate;
    d["error_centroid"] = m.error_centroid;
    d["error_weighted"] = m.error_weighted;
    d["n_samples"] = m.n_samples;
    d["fallback_count"] = m.fallback_count;
    d["unknown_floor_count"] = m.unknown_floor_count;
    return d;
}

py::tuple xy(const Point2& p) { return py::make_tuple(p.x, p.y); }

py::dict estimate_dict(const LocalizationEstimate& e) {
    py::dict d;
    d["building"] = e.building;
    d["floor"] = e.floor;
    d["centroid"] = xy(e.centroid);
    d["weighted_centroid"] = xy(e.weighted_centroid);
    d["candidates_used"] = e.candidates_used;
    d["fallback_used"] = e.fallback_used;
    d["floor_unknown"] = e.floor_unknown;
    return d;
}

PreparedDataset load_data(const std::string& path, const NormalizationBounds& bounds) {
    if (std::filesystem::path(path).extension() == ".csv") {
        RunConfig c;
        c.data_path = path;
        c.bounds = bounds;
        return load_prepared(c);
    }
    return read_cache(std::filesystem::path(path));
}

ReferencePointIndex index_from(const std::map<std::tuple<std::size_t, std::size_t, std::size_t>,
                                              std::pair<double, double>>& points) {
    ReferencePointIndex::Map m;
    for (const auto& [k, p] : points) {
        m.emplace(HierarchicalLabel{std::get<0>(k), std::get<1>(k), std::get<2>(k)},
                  ReferencePoint{{p.first, p.second}, 1});
    }
    return ReferencePointIndex(std::move(m));
}

}  // namespace

PYBIND11_MODULE(_hiloc, m) {
    m.doc() = "Hierarchical Wi-Fi fingerprint localization";

    static py::exception<FormatError> format_error(m, "FormatError", PyExc_ValueError);
    static py::exception<UnknownFloorError> unknown_floor(m, "UnknownFloorError", PyExc_ValueError);
    static py::exception<nn::DivergenceError> divergence(m, "DivergenceError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const FormatError& e) {
            py::set_error(format_error, e.what());
        } catch (const UnknownFloorError& e) {
            py::set_error(unknown_floor, e.what());
        } catch (const nn::DivergenceError& e) {
            py::set_error(divergence, e.what());
        }
    });

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_readwrite("data_path", &RunConfig::data_path)
        .def_readwrite("cache_path", &RunConfig::cache_path)
        .def_readwrite("model_path", &RunConfig::model_path)
        .def_readwrite("seed", &RunConfig::seed)
        .def_readwrite("split_ratio", &RunConfig::split_ratio)
        .def_readwrite("sae_hidden", &RunConfig::sae_hidden)
        .def_readwrite("classifier_hidden", &RunConfig::head_hidden)
        .def_readwrite("dropout", &RunConfig::dropout)
        .def_readwrite("epochs", &RunConfig::epochs)
        .def_readwrite("batch_size", &RunConfig::batch_size)
        .def_readwrite("fit_ratio", &RunConfig::fit_ratio)
        .def_readwrite("learning_rate", &RunConfig::learning_rate)
        .def_readwrite("freeze_encoder", &RunConfig::freeze_encoder)
        .def_readwrite("threads", &RunConfig::threads)
        .def_property(
            "kappa", [](const RunConfig& c) { return c.estimator.kappa; },
            [](RunConfig& c, std::size_t k) { c.estimator.kappa = k; })
        .def_property(
            "sigma", [](const RunConfig& c) { return c.estimator.sigma; },
            [](RunConfig& c, double s) { c.estimator.sigma = s; })
        .def("validate", &RunConfig::validate)
        .def("to_json", &RunConfig::to_json)
        .def_static("from_json", &RunConfig::from_json)
        .def_static("load", [](const std::string& p) { return RunConfig::load(p); });

    m.def(
        "prepare",
        [](const std::string& csv, const std::string& cache) {
            RunConfig c;
            c.data_path = csv;
            PrepareSummary s;
            const auto data = load_prepared(c, &s);
            if (!cache.empty()) write_cache(std::filesystem::path(cache), data);
            py::dict d;
            d["rows"] = s.rows;
            d["buildings"] = s.stats.n_buildings;
            d["floors_per_building"] = s.stats.floors_per_building;
            d["locations_per_floor"] = s.stats.locations_per_floor;
            d["multilabel_width"] = s.multilabel_width;
            d["multiclass_width"] = s.multiclass_width;
            d["sha256"] = s.sha256;
            return d;
        },
        py::arg("csv"), py::arg("cache") = "", "Parse and normalize a dataset CSV; optionally write the cache.");

    m.def(
        "output_width",
        [](std::vector<std::vector<std::size_t>> locations_per_floor) {
            DatasetStats s;
            s.n_buildings = locations_per_floor.size();
            for (const auto& f : locations_per_floor) s.floors_per_building.push_back(f.size());
            s.locations_per_floor = std::move(locations_per_floor);
            s.validate();
            return py::make_tuple(output_width(s), multiclass_width(s));
        },
        py::arg("locations_per_floor"), "(multi-label width, multi-class width) for per-floor location counts.");

    m.def(
        "select_candidates",
        [](std::vector<double> scores, std::size_t kappa, double sigma) {
            std::vector<std::pair<std::size_t, double>> out;
            for (const auto& c : select_candidates(scores, {kappa, sigma})) out.emplace_back(c.location, c.score);
            return out;
        },
        py::arg("location_scores"), py::arg("kappa"), py::arg("sigma"));

    m.def(
        "localize",
        [](std::vector<double> scores, std::tuple<std::size_t, std::size_t, std::size_t> layout,
           const std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::pair<double, double>>& points,
           std::size_t kappa, double sigma, bool building_fallback) {
            const SegmentLayout l{std::get<0>(layout), std::get<1>(layout), std::get<2>(layout)};
            return estimate_dict(localize(scores, l, {kappa, sigma}, index_from(points), building_fallback));
        },
        py::arg("scores"), py::arg("layout"), py::arg("reference_points"), py::arg("kappa") = 8,
        py::arg("sigma") = 0.2, py::arg("building_fallback") = false,
        "Building/floor decision and coordinates from a multi-label output vector.");

    m.def(
        "train",
        [](const RunConfig& config) {
            const auto data = config.cache_path.empty() ? load_data(config.data_path, config.bounds)
                                                        : load_data(config.cache_path, config.bounds);
            TrainOutcome out;
            {
                py::gil_scoped_release release;
                out = train_pipeline(config, data);
            }
            nn::save_model(config.model_path, out.model);
            py::dict d;
            d["model_path"] = config.model_path;
            d["output_width"] = out.model.network.output_dim();
            d["sae_train_loss"] = out.sae_history.train_loss;
            d["classifier_train_loss"] = out.classifier_history.train_loss;
            d["sae_validation_mse"] = out.sae_val_mse;
            d["sae_constant_predictor_mse"] = out.sae_baseline_mse;
            return d;
        },
        py::arg("config"), "Pretrain, assemble and fit; writes the model to config.model_path.");

    py::class_<TrainedModel>(m, "Model")
        .def_static("load", &TrainedModel::load, py::arg("path"))
        .def_property_readonly("layout",
                               [](const TrainedModel& t) {
                                   const auto l = t.layout();
                                   return py::make_tuple(l.n_buildings, l.n_floors, l.n_locations);
                               })
        .def_property_readonly("reference_point_count", [](const TrainedModel& t) { return t.index.size(); })
        .def(
            "predict",
            [](const TrainedModel& t, std::vector<int> rss, std::size_t kappa, double sigma) {
                const auto p = predict_rss(t, rss, {kappa, sigma});
                auto d = estimate_dict(p.estimate);
                d["building_id"] = p.building_id;
                d["floor_id"] = p.floor_id ? py::cast(*p.floor_id) : py::none();
                d["scores"] = p.scores;
                return d;
            },
            py::arg("rss"), py::arg("kappa") = 8, py::arg("sigma") = 0.2,
            "Localize one vector of 520 RSS values (100 = not detected).")
        .def(
            "evaluate",
            [](const TrainedModel& t, const std::string& data_path, std::size_t kappa, double sigma, unsigned threads) {
                const auto data = load_data(data_path, t.bounds);
                const auto val = validation_split(t, data);
                eval::MetricsReport r;
                {
                    py::gil_scoped_release release;
                    r = eval::evaluate(t.container.network, t.layout(), {kappa, sigma}, val, t.index,
                                       std::max(1u, threads));
                }
                return metrics_dict(r);
            },
            py::arg("data"), py::arg("kappa") = 8, py::arg("sigma") = 0.2, py::arg("threads") = 1,
            "Metrics on the validation split of a dataset CSV or cache.")
        .def(
            "sweep",
            [](const TrainedModel& t, const std::string& data_path, const std::string& format, unsigned threads) {
                if (format != "csv" && format != "markdown") throw ValueError("format must be csv or markdown");
                const auto data = load_data(data_path, t.bounds);
                const auto val = validation_split(t, data);
                const auto r = eval::sweep(t.container.network, t.layout(), eval::default_kappas(),
                                           eval::default_sigmas(), val, t.index, std::max(1u, threads));
                const auto fmt = format == "csv" ? eval::ReportFormat::csv : eval::ReportFormat::markdown;
                return eval::emit_report(r, fmt, eval::best_cell(r));
            },
            py::arg("data"), py::arg("format") = "csv", py::arg("threads") = 1,
            "Full kappa/sigma grid report on the validation split.");
}
