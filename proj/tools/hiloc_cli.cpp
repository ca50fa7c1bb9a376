#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hiloc/pipeline.hpp"

namespace {

using namespace hiloc;

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kFormat = 3, kValue = 4, kDivergence = 5 };

struct Options {
    std::string config_file;
    std::string data, cache, model, report, encoder_out;
    std::optional<std::uint64_t> seed;
    std::optional<double> split_ratio;
    std::optional<std::size_t> epochs, batch_size, kappa, knn_k;
    std::optional<double> sigma;
    std::optional<unsigned> threads;
    std::optional<std::string> sha256;
    bool sweep = false;
    bool freeze_encoder = false;
    std::string format = "csv";
    std::string values, input;
};

void apply_env(std::string& field, const char* name) {
    if (const char* v = std::getenv(name); v != nullptr && *v != '\0') field = v;
}

// Precedence: defaults < config file < environment (paths) < flags.
RunConfig resolve(const Options& o) {
    RunConfig c = o.config_file.empty() ? RunConfig{} : RunConfig::load(o.config_file);
    apply_env(c.data_path, "HILOC_DATA");
    apply_env(c.cache_path, "HILOC_CACHE");
    apply_env(c.model_path, "HILOC_MODEL");
    apply_env(c.report_path, "HILOC_REPORT");
    if (!o.data.empty()) c.data_path = o.data;
    if (!o.cache.empty()) c.cache_path = o.cache;
    if (!o.model.empty()) c.model_path = o.model;
    if (!o.report.empty()) c.report_path = o.report;
    if (o.seed) c.seed = *o.seed;
    if (o.split_ratio) c.split_ratio = *o.split_ratio;
    if (o.epochs) c.epochs = *o.epochs;
    if (o.batch_size) c.batch_size = *o.batch_size;
    if (o.kappa) c.estimator.kappa = *o.kappa;
    if (o.sigma) c.estimator.sigma = *o.sigma;
    if (o.threads) c.threads = *o.threads;
    if (o.freeze_encoder) c.freeze_encoder = true;
    c.validate();
    return c;
}

PreparedDataset load_data(const RunConfig& c) {
    if (!c.cache_path.empty() && std::filesystem::exists(c.cache_path)) {
        return read_cache(std::filesystem::path(c.cache_path));
    }
    if (c.data_path.empty()) throw ValueError("no dataset given (use --data or --cache)");
    return load_prepared(c);
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string point(const Point2& p) { return "(" + fmt("%.3f", p.x) + ", " + fmt("%.3f", p.y) + ")"; }

void write_output(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open report file for writing: " + path);
    out << text;
    if (!out) throw FormatError("failed writing report file: " + path);
}

void print_metrics(std::ostream& os, const std::string& label, const eval::MetricsReport& m) {
    os << label << ": building " << fmt("%.2f", m.building_hit_rate) << "%, floor "
              << fmt("%.2f", m.floor_hit_rate) << "%, success " << fmt("%.2f", m.success_rate)
              << "%, error (centroid) " << fmt("%.2f", m.error_centroid) << " m, error (weighted) "
              << fmt("%.2f", m.error_weighted) << " m, samples " << m.n_samples << ", fallbacks "
              << m.fallback_count << ", unknown floors " << m.unknown_floor_count << "\n";
}

int cmd_prepare(const Options& o) {
    const auto c = resolve(o);
    PrepareSummary s;
    const auto data = load_prepared(c, &s, o.sha256);
    if (!c.cache_path.empty()) write_cache(std::filesystem::path(c.cache_path), data);
    std::cout << "rows: " << s.rows << "\n";
    std::cout << "buildings: " << s.stats.n_buildings << "\n";
    std::cout << "max floors: " << s.stats.max_floors() << "\n";
    std::cout << "max locations: " << s.stats.max_locations() << "\n";
    std::cout << "output nodes (multi-label): " << s.multilabel_width << ", (multi-class): " << s.multiclass_width
              << "\n";
    std::cout << "sha256: " << s.sha256 << "\n";
    if (!c.cache_path.empty()) std::cout << "cache: " << c.cache_path << "\n";
    return kOk;
}

int cmd_train(const Options& o) {
    const auto c = resolve(o);
    const auto data = load_data(c);
    const auto outcome = train_pipeline(c, data, [&](const StageLog& log) {
        std::cerr << log.stage << " epoch " << log.report.epoch << "/" << c.epochs << " loss "
                  << fmt("%.6f", log.report.train_loss);
        if (std::isfinite(log.report.val_loss)) std::cerr << " monitor " << fmt("%.6f", log.report.val_loss);
        std::cerr << "\n";
    });
    nn::save_model(c.model_path, outcome.model);
    if (!o.encoder_out.empty()) nn::save_model(o.encoder_out, outcome.encoder);
    std::cout << "model: " << c.model_path << "\n";
    std::cout << "output width: " << outcome.model.network.output_dim() << "\n";
    std::cout << "sae validation mse: " << fmt("%.6g", outcome.sae_val_mse)
              << " (constant predictor " << fmt("%.6g", outcome.sae_baseline_mse) << ")\n";
    return kOk;
}

struct Loaded {
    TrainedModel model;
    std::vector<NormalizedSample> train, val;
};

Loaded load_model_and_splits(const RunConfig& c, bool need_train) {
    Loaded l{TrainedModel::load(c.model_path), {}, {}};
    const auto data = load_data(c);
    l.val = validation_split(l.model, data);
    if (need_train) l.train = training_split(l.model, data);
    if (l.val.empty()) throw ValueError("validation split is empty");
    return l;
}

int run_sweep(const Options& o, const RunConfig& c) {
    const auto l = load_model_and_splits(c, o.knn_k.has_value());
    std::vector<std::size_t> kappas = c.sweep_kappas;
    std::vector<double> sigmas = c.sweep_sigmas;
    if (o.kappa) kappas = {*o.kappa};
    if (o.sigma) sigmas = {*o.sigma};
    const auto result = eval::sweep(l.model.container.network, l.model.layout(), kappas, sigmas, l.val,
                                    l.model.index, c.effective_threads());
    const auto best = eval::best_cell(result);
    const auto format = o.format == "markdown" ? eval::ReportFormat::markdown : eval::ReportFormat::csv;
    write_output(c.report_path, eval::emit_report(result, format, best));
    const auto& cell = result.cells[best];
    std::cerr << "best cell: kappa " << cell.kappa << ", sigma "
              << (cell.sigma ? fmt("%.1f", *cell.sigma) : std::string("N/A")) << "\n";
    if (o.knn_k) {
        const auto knn = eval::knn_baseline(l.train, l.val, *o.knn_k, c.effective_threads());
        std::ostringstream label;
        label << "knn (k=" << knn.k_used << ")";
        print_metrics(c.report_path.empty() ? std::cerr : std::cout, label.str(), knn.metrics);
    }
    return kOk;
}

int cmd_sweep(const Options& o) { return run_sweep(o, resolve(o)); }

int cmd_evaluate(const Options& o) {
    const auto c = resolve(o);
    if (o.sweep) return run_sweep(o, c);
    const auto l = load_model_and_splits(c, o.knn_k.has_value());
    const auto m = eval::evaluate(l.model.container.network, l.model.layout(), c.estimator, l.val, l.model.index,
                                  c.effective_threads());
    std::ostringstream label;
    label << "kappa " << c.estimator.kappa << ", sigma " << fmt("%.2f", c.estimator.sigma);
    print_metrics(std::cout, label.str(), m);
    if (o.knn_k) {
        const auto knn = eval::knn_baseline(l.train, l.val, *o.knn_k, c.effective_threads());
        std::ostringstream kl;
        kl << "knn (k=" << knn.k_used << ")";
        print_metrics(std::cout, kl.str(), knn.metrics);
    }
    return kOk;
}

std::vector<int> parse_values(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t\r\n");
        const auto e = item.find_last_not_of(" \t\r\n");
        if (b == std::string::npos) throw ValueError("empty RSS value at position " + std::to_string(out.size() + 1));
        const auto token = item.substr(b, e - b + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size() || v != static_cast<double>(static_cast<int>(v))) {
            throw ValueError("malformed RSS value '" + token + "' at position " + std::to_string(out.size() + 1));
        }
        out.push_back(static_cast<int>(v));
    }
    return out;
}

void print_prediction(const Prediction& p, const std::string& prefix) {
    const auto& e = p.estimate;
    std::cout << prefix << "building " << p.building_id << ", floor ";
    if (p.floor_id) std::cout << *p.floor_id;
    else std::cout << "unknown (index " << e.floor << ")";
    std::cout << ", centroid " << point(e.centroid) << ", weighted centroid " << point(e.weighted_centroid)
              << ", candidates " << e.candidates_used << (e.fallback_used ? ", fallback" : "") << "\n";
}

int cmd_predict(const Options& o) {
    const auto c = resolve(o);
    if (o.values.empty() == o.input.empty()) throw ValueError("predict needs exactly one of --values or --input");
    const auto model = TrainedModel::load(c.model_path);
    if (!o.values.empty()) {
        const auto rss = parse_values(o.values);
        print_prediction(predict_rss(model, rss, c.estimator), "");
        return kOk;
    }
    const auto records = parse_csv(std::filesystem::path(o.input));
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto p = predict_rss(model, records[i].rss, c.estimator);
        print_prediction(p, "row " + std::to_string(i + 1) + ": ");
    }
    return kOk;
}

int cmd_inspect(const Options& o) {
    const auto c = resolve(o);
    const auto container = nn::load_model(c.model_path);
    std::cout << "role: " << container.role << "\n";
    std::cout << "layers:";
    for (const auto& s : container.network.specs()) {
        static const char* names[] = {"linear", "relu", "sigmoid"};
        std::cout << " " << s.input_dim << "->" << s.output_dim << " " << names[static_cast<int>(s.activation)];
        if (s.dropout_rate > 0.0) std::cout << " (dropout " << fmt("%.2f", s.dropout_rate) << ")";
        std::cout << ";";
    }
    std::cout << "\nparameters: " << container.network.parameter_count() << "\n";
    if (container.role == "classifier") {
        const auto m = TrainedModel::from_container(container);
        const auto& st = m.codec.stats();
        std::cout << "buildings: " << st.n_buildings << ", max floors: " << st.max_floors()
                  << ", max locations: " << st.max_locations() << "\n";
        std::cout << "output nodes (multi-label): " << output_width(st)
                  << ", (multi-class): " << multiclass_width(st) << "\n";
        std::cout << "reference points: " << m.index.size() << "\n";
    }
    for (const auto& [name, body] : container.blocks) {
        std::cout << "block " << name << ": " << body.size() << " bytes\n";
    }
    if (auto it = container.blocks.find("run"); it != container.blocks.end()) std::cout << it->second << "\n";
    return kOk;
}

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--config", o.config_file, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--data", o.data, "UJIIndoorLoc-format CSV (env HILOC_DATA)");
    sub->add_option("--cache", o.cache, "normalized dataset cache (env HILOC_CACHE)");
    sub->add_option("--model", o.model, "model file (env HILOC_MODEL)");
    sub->add_option("--report", o.report, "report output file (env HILOC_REPORT)");
    sub->add_option("--seed", o.seed, "split and training seed");
    sub->add_option("--split-ratio", o.split_ratio, "training fraction of the train/validation split");
    sub->add_option("--threads", o.threads, "worker threads for evaluation (0 = all cores)");
}

void add_estimator(CLI::App* sub, Options& o) {
    sub->add_option("--kappa", o.kappa, "number of largest location scores considered");
    sub->add_option("--sigma", o.sigma, "candidate threshold as a fraction of the maximum score");
}

void add_report(CLI::App* sub, Options& o) {
    sub->add_option("--format", o.format, "report format")->check(CLI::IsMember({"csv", "markdown"}));
    sub->add_option("--knn-baseline", o.knn_k, "also report a k-nearest-neighbour baseline");
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Building/floor classification and location estimation from Wi-Fi fingerprints", "hiloc"};
    app.require_subcommand(1);
    Options o;

    auto* prepare = app.add_subcommand("prepare", "parse, validate and normalize a dataset; print label statistics");
    add_common(prepare, o);
    prepare->add_option("--sha256", o.sha256, "expected SHA-256 of the CSV");

    auto* train = app.add_subcommand("train", "pretrain the autoencoder, then train the classifier");
    add_common(train, o);
    train->add_option("--epochs", o.epochs, "epochs per training stage");
    train->add_option("--batch-size", o.batch_size, "minibatch size");
    train->add_flag("--freeze-encoder", o.freeze_encoder, "keep pretrained encoder weights fixed");
    train->add_option("--save-encoder", o.encoder_out, "also write the pretrained encoder");

    auto* sweep = app.add_subcommand("sweep", "evaluate the kappa/sigma grid on the validation split");
    add_common(sweep, o);
    add_estimator(sweep, o);
    add_report(sweep, o);

    auto* evaluate = app.add_subcommand("evaluate", "evaluate one kappa/sigma setting on the validation split");
    add_common(evaluate, o);
    add_estimator(evaluate, o);
    add_report(evaluate, o);
    evaluate->add_flag("--sweep", o.sweep, "evaluate the whole grid instead");

    auto* predict = app.add_subcommand("predict", "localize RSS vectors with a trained model");
    add_common(predict, o);
    add_estimator(predict, o);
    predict->add_option("--values", o.values, "520 comma-separated RSS values (100 = not detected)");
    predict->add_option("--input", o.input, "CSV file in the dataset format");

    auto* inspect = app.add_subcommand("inspect", "describe a model file");
    add_common(inspect, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return kUsage;
    }

    if (prepare->parsed()) return cmd_prepare(o);
    if (train->parsed()) return cmd_train(o);
    if (sweep->parsed()) return cmd_sweep(o);
    if (evaluate->parsed()) return cmd_evaluate(o);
    if (predict->parsed()) return cmd_predict(o);
    return cmd_inspect(o);
}

std::string one_line(std::string s) {
    for (auto& ch : s) {
        if (ch == '\n' || ch == '\r') ch = ' ';
    }
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const nn::DivergenceError& e) {
        std::cerr << "error: divergence: " << one_line(e.what()) << "\n";
        return kDivergence;
    } catch (const FormatError& e) {
        std::cerr << "error: format: " << one_line(e.what()) << "\n";
        return kFormat;
    } catch (const ValueError& e) {
        std::cerr << "error: value: " << one_line(e.what()) << "\n";
        return kValue;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << one_line(e.what()) << "\n";
        return kInternal;
    }
}
