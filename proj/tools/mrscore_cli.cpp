// Command-line front end for the evaluation pipeline:
//   gen-data   build a tiered scoring dataset from ground truths
//   pairs      turn a scored dataset into accepted/rejected training pairs
//   train      fit the reward model on pairs
//   mrscore    score a dataset with a trained model
//   baselines  per-report BLEU-4 / ROUGE-L / METEOR / CIDEr
//   correlate  rank correlations of metric columns against human ratings

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mrscore/corpus.hpp"
#include "mrscore/jsonl.hpp"
#include "mrscore/llm_http.hpp"
#include "mrscore/llmgen.hpp"
#include "mrscore/nlgmetrics.hpp"
#include "mrscore/reward.hpp"
#include "mrscore/stats.hpp"

namespace {

using namespace mrscore;

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

int g_verbosity = 0;

void log_resolved_config(const CLI::App& app) {
    // every run logs the configuration it actually used
    for (const CLI::Option* opt : app.get_options()) {
        if (opt->get_name() == "--help") continue;
        std::string name = opt->get_name();
        std::ostringstream values;
        if (opt->count() > 0) {
            bool first = true;
            for (const auto& r : opt->results()) {
                if (!first) values << ',';
                values << r;
                first = false;
            }
        } else {
            values << opt->get_default_str();
        }
        std::cerr << "config: " << name << " = " << values.str() << "\n";
    }
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataArgs {
    std::string gt_path;
    std::string backend = "mock";
    std::uint64_t seed = 0;
    std::string out_path;
    std::string rejects_path;
    std::string api_base;
    std::string model = "gpt-4";
    int retries = 2;
    int max_in_flight = 4;
    int timeout_sec = 30;
};

void write_rejects(const std::vector<Rejection>& rejects, const std::string& path) {
    if (path.empty()) return;
    std::vector<Json> rows;
    rows.reserve(rejects.size());
    for (const auto& r : rejects) rows.push_back(to_json(r));
    write_jsonl(path, rows);
}

int run_gen_data(const GenDataArgs& args) {
    std::vector<GroundTruth> gts = load_ground_truths(args.gt_path);

    std::unique_ptr<ChatBackend> backend;
    if (args.backend == "mock") {
        backend = std::make_unique<MockBackend>(args.seed);
    } else if (args.backend == "remote") {
        HttpBackendConfig cfg;
        cfg.base_url = args.api_base;
        cfg.model = args.model;
        cfg.api_key = api_key_from_env();
        cfg.timeout_sec = args.timeout_sec;
        if (cfg.base_url.empty())
            throw UsageError("--backend remote requires --api-base");
        if (cfg.api_key.empty())
            throw UsageError(std::string("--backend remote requires the ") + kApiKeyEnvVar +
                             " environment variable");
        backend = std::make_unique<HttpBackend>(std::move(cfg));
    } else {
        throw UsageError("--backend must be 'mock' or 'remote'");
    }

    GenOptions options;
    options.parse_retries = args.retries;
    options.max_in_flight = args.max_in_flight;

    BuildResult result;
    try {
        result = build_scoring_dataset(gts, *backend, options);
    } catch (const BackendUnreachable& e) {
        save_dataset(e.partial.records, args.out_path);
        write_rejects(e.partial.rejects, args.rejects_path);
        std::cerr << "error: " << e.what() << "\n"
                  << "partial results saved: " << e.partial.records.size() << " records\n";
        return 1;
    }

    save_dataset(result.records, args.out_path);
    write_rejects(result.rejects, args.rejects_path);

    std::map<std::string, int> per_tier;
    for (const auto& r : result.records) per_tier[to_string(*r.report.tier)]++;
    std::cout << "gen-data: " << result.records.size() << " records ("
              << per_tier["low"] << " low, " << per_tier["mid"] << " mid, "
              << per_tier["high"] << " high), " << result.rejects.size()
              << " rejected -> " << args.out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// pairs
// ---------------------------------------------------------------------------

int run_pairs(const std::string& dataset_path, const std::string& out_path) {
    std::vector<ScoredReport> records = load_dataset(dataset_path);
    std::vector<ReportPair> pairs = make_pairs(records);
    save_pairs(pairs, out_path);

    double mean_margin = 0.0;
    for (const auto& p : pairs) mean_margin += p.margin;
    if (!pairs.empty()) mean_margin /= static_cast<double>(pairs.size());
    std::cout << "pairs: " << pairs.size() << " pairs from " << records.size()
              << " records, mean margin " << std::fixed << std::setprecision(3) << mean_margin
              << " -> " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string pairs_path;
    std::string out_path;
    int epochs = 50;
    double lr = 0.05;
    std::size_t batch = 16;
    std::uint64_t seed = 0;
    double l2 = 1e-4;
    std::size_t dim = 4096;
    bool no_shuffle = false;
};

int run_train(const TrainArgs& args) {
    std::vector<ReportPair> pairs = load_pairs(args.pairs_path);

    FeatureConfig fc;
    fc.dim = args.dim;
    TrainingConfig tc;
    tc.learning_rate = args.lr;
    tc.epochs = args.epochs;
    tc.batch_size = args.batch;
    tc.l2_penalty = args.l2;
    tc.seed = args.seed;
    tc.shuffle = !args.no_shuffle;
    if (g_verbosity > 0)
        tc.epoch_callback = [](int epoch, double loss) {
            std::cerr << "epoch " << std::setw(3) << epoch << "  loss " << std::setprecision(8)
                      << loss << "\n";
        };

    RewardModel model = train(pairs, fc, tc);
    save_model(model, args.out_path);

    double acc = evaluate_ranking(model, pairs);
    std::cout << "train: " << pairs.size() << " pairs, " << args.epochs << " epochs, final loss "
              << std::setprecision(6) << model.training_meta.at("final_loss")
              << ", training ranking accuracy " << std::setprecision(3) << acc << " -> "
              << args.out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// mrscore
// ---------------------------------------------------------------------------

int run_mrscore(const std::string& model_path, const std::string& dataset_path,
                const std::string& out_path) {
    RewardModel model = load_model(model_path);
    std::vector<ScoredReport> records = load_dataset(dataset_path);

    std::vector<Json> rows;
    rows.reserve(records.size());
    double mean = 0.0;
    for (const auto& r : records) {
        double score = reward(model, r.report.ground_truth, r.report.candidate);
        mean += score;
        Json j;
        j["id"] = r.report.id;
        j["mrscore"] = score;
        rows.push_back(j);
    }
    write_jsonl(out_path, rows);
    if (!records.empty()) mean /= static_cast<double>(records.size());
    std::cout << "mrscore: " << records.size() << " reports, mean score " << std::fixed
              << std::setprecision(4) << mean << " -> " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// baselines
// ---------------------------------------------------------------------------

int run_baselines(const std::string& dataset_path, const std::string& out_path) {
    std::vector<ScoredReport> records = load_dataset(dataset_path);
    if (records.empty()) throw std::runtime_error("dataset is empty: " + dataset_path);

    // the evaluation set's own references feed the idf table
    std::vector<std::string> reference_corpus;
    reference_corpus.reserve(records.size());
    for (const auto& r : records) reference_corpus.push_back(r.report.ground_truth);
    IdfTable idf = build_idf(reference_corpus);

    std::vector<Json> rows;
    rows.reserve(records.size());
    for (const auto& r : records) {
        const std::string& gt = r.report.ground_truth;
        const std::string& cand = r.report.candidate;
        Json j;
        j["id"] = r.report.id;
        j["bleu4"] = bleu4(cand, {gt}).value;
        j["rouge_l"] = rouge_l(cand, gt).value;
        j["meteor"] = meteor_lite(cand, gt).value;
        j["cider"] = cider(cand, {gt}, idf).value;
        rows.push_back(j);
    }
    write_jsonl(out_path, rows);
    std::cout << "baselines: " << records.size() << " reports -> " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// correlate
// ---------------------------------------------------------------------------

std::string fmt_num(double v, int precision = 3) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

std::string fmt_p(double p) {
    std::ostringstream os;
    if (p != 0.0 && p < 0.001)
        os << std::scientific << std::setprecision(2) << p;
    else
        os << std::fixed << std::setprecision(3) << p;
    return os.str();
}

void write_scatter_svg(const std::string& path, const std::vector<std::string>& metrics,
                       const std::map<std::string, std::vector<double>>& columns,
                       const std::vector<double>& human) {
    const int panel_w = 300, panel_h = 260, margin = 42, per_row = 3;
    const int rows = (static_cast<int>(metrics.size()) + per_row - 1) / per_row;
    const int width = panel_w * std::min<int>(per_row, static_cast<int>(metrics.size()));
    const int height = panel_h * std::max(rows, 1);

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    double hmin = human[0], hmax = human[0];
    for (double h : human) {
        hmin = std::min(hmin, h);
        hmax = std::max(hmax, h);
    }
    if (hmax == hmin) hmax = hmin + 1.0;

    for (std::size_t m = 0; m < metrics.size(); ++m) {
        const auto& ys = columns.at(metrics[m]);
        double ymin = ys[0], ymax = ys[0];
        for (double y : ys) {
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
        if (ymax == ymin) ymax = ymin + 1.0;

        int ox = static_cast<int>(m % per_row) * panel_w;
        int oy = static_cast<int>(m / per_row) * panel_h;
        int x0 = ox + margin, y0 = oy + panel_h - margin;
        int x1 = ox + panel_w - 12, y1 = oy + 22;

        out << "<text x=\"" << ox + panel_w / 2 << "\" y=\"" << oy + 14
            << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
            << metrics[m] << "</text>\n";
        out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
            << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << x0 << "\" y=\"" << y0 + 14
            << "\" font-size=\"9\" font-family=\"sans-serif\">" << fmt_num(hmin, 1)
            << "</text>\n";
        out << "<text x=\"" << x1 << "\" y=\"" << y0 + 14
            << "\" text-anchor=\"end\" font-size=\"9\" font-family=\"sans-serif\">"
            << fmt_num(hmax, 1) << "</text>\n";
        out << "<text x=\"" << x0 - 4 << "\" y=\"" << y0
            << "\" text-anchor=\"end\" font-size=\"9\" font-family=\"sans-serif\">"
            << fmt_num(ymin, 2) << "</text>\n";
        out << "<text x=\"" << x0 - 4 << "\" y=\"" << y1 + 4
            << "\" text-anchor=\"end\" font-size=\"9\" font-family=\"sans-serif\">"
            << fmt_num(ymax, 2) << "</text>\n";

        for (std::size_t i = 0; i < human.size(); ++i) {
            double fx = (human[i] - hmin) / (hmax - hmin);
            double fy = (ys[i] - ymin) / (ymax - ymin);
            double px = x0 + fx * (x1 - x0);
            double py = y0 - fy * (y0 - y1);
            out << "<circle cx=\"" << fmt_num(px, 1) << "\" cy=\"" << fmt_num(py, 1)
                << "\" r=\"2.5\" fill=\"steelblue\" fill-opacity=\"0.7\"/>\n";
        }
    }
    out << "</svg>\n";
}

int run_correlate(const std::string& metrics_path, const std::string& human_path,
                  const std::string& scatter_path) {
    // human ratings keyed by id: {"id": ..., "score": ...}
    std::map<std::string, double> human;
    for_each_jsonl(human_path, [&](const Json& j, std::size_t line_no) {
        try {
            human[j.at("id").get<std::string>()] = j.at("score").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw JsonlError(human_path, line_no, e.what());
        }
    });

    // metric rows keyed by id; every numeric field is a metric column
    std::map<std::string, std::map<std::string, double>> metric_rows;
    std::vector<std::string> metric_names;
    for_each_jsonl(metrics_path, [&](const Json& j, std::size_t line_no) {
        if (!j.contains("id")) throw JsonlError(metrics_path, line_no, "record lacks 'id'");
        std::string id = j.at("id").get<std::string>();
        for (const auto& [key, value] : j.items()) {
            if (key == "id" || !value.is_number()) continue;
            metric_rows[id][key] = value.get<double>();
            if (std::find(metric_names.begin(), metric_names.end(), key) == metric_names.end())
                metric_names.push_back(key);
        }
    });

    std::vector<std::string> ids;
    for (const auto& [id, row] : metric_rows)
        if (human.count(id)) ids.push_back(id);
    if (ids.size() < 2)
        throw std::runtime_error("fewer than 2 ids shared between " + metrics_path + " and " +
                                 human_path);

    std::vector<double> human_col;
    human_col.reserve(ids.size());
    for (const auto& id : ids) human_col.push_back(human.at(id));

    std::map<std::string, std::vector<double>> columns;
    for (const auto& name : metric_names) {
        std::vector<double> col;
        col.reserve(ids.size());
        for (const auto& id : ids) {
            auto it = metric_rows.at(id).find(name);
            if (it == metric_rows.at(id).end())
                throw std::runtime_error("metric '" + name + "' missing for id '" + id + "'");
            col.push_back(it->second);
        }
        columns[name] = std::move(col);
    }

    // table layout: metrics as columns, coefficient and p-value as rows
    std::vector<CorrelationResult> kendall, spearman;
    for (const auto& name : metric_names) {
        kendall.push_back(kendall_tau_b(columns[name], human_col));
        spearman.push_back(spearman_rho(columns[name], human_col));
    }

    const int name_w = 16, col_w = 12;
    std::cout << std::left << std::setw(name_w) << ("n=" + std::to_string(ids.size()));
    for (const auto& name : metric_names) std::cout << std::right << std::setw(col_w) << name;
    std::cout << "\n" << std::left << std::setw(name_w) << "P value";
    for (std::size_t i = 0; i < metric_names.size(); ++i)
        std::cout << std::right << std::setw(col_w) << fmt_p(kendall[i].p_value);
    std::cout << "\n" << std::left << std::setw(name_w) << "Kendall's Tau";
    for (std::size_t i = 0; i < metric_names.size(); ++i)
        std::cout << std::right << std::setw(col_w) << fmt_num(kendall[i].coefficient);
    std::cout << "\n" << std::left << std::setw(name_w) << "P value";
    for (std::size_t i = 0; i < metric_names.size(); ++i)
        std::cout << std::right << std::setw(col_w) << fmt_p(spearman[i].p_value);
    std::cout << "\n" << std::left << std::setw(name_w) << "Spearman";
    for (std::size_t i = 0; i < metric_names.size(); ++i)
        std::cout << std::right << std::setw(col_w) << fmt_num(spearman[i].coefficient);
    std::cout << "\n";

    if (!scatter_path.empty()) {
        write_scatter_svg(scatter_path, metric_names, columns, human_col);
        std::cerr << "scatter written to " << scatter_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MRScore radiology-report evaluation pipeline"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a key = value file");
    app.add_flag("-v,--verbose", g_verbosity, "more logging on stderr");

    GenDataArgs gen;
    CLI::App* cmd_gen = app.add_subcommand("gen-data", "generate a tiered scoring dataset");
    cmd_gen->add_option("--gt", gen.gt_path, "ground truths (jsonl: gt_id, ground_truth)")
        ->required();
    cmd_gen->add_option("--backend", gen.backend, "mock | remote")
        ->default_str("mock");
    cmd_gen->add_option("--seed", gen.seed, "mock backend seed")->default_str("0");
    cmd_gen->add_option("--out", gen.out_path, "output dataset jsonl")->required();
    cmd_gen->add_option("--rejects", gen.rejects_path, "rejection log jsonl");
    cmd_gen->add_option("--api-base", gen.api_base, "remote endpoint base URL");
    cmd_gen->add_option("--model", gen.model, "remote model name")->default_str("gpt-4");
    cmd_gen->add_option("--retries", gen.retries, "scoring parse retries")->default_str("2");
    cmd_gen->add_option("--max-in-flight", gen.max_in_flight, "concurrent backend calls")
        ->default_str("4");
    cmd_gen->add_option("--timeout", gen.timeout_sec, "remote timeout seconds")
        ->default_str("30");

    std::string pairs_dataset, pairs_out;
    CLI::App* cmd_pairs = app.add_subcommand("pairs", "build accepted/rejected training pairs");
    cmd_pairs->add_option("--dataset", pairs_dataset, "scored dataset jsonl")->required();
    cmd_pairs->add_option("--out", pairs_out, "output pairs jsonl")->required();

    TrainArgs train_args;
    CLI::App* cmd_train = app.add_subcommand("train", "train the reward model");
    cmd_train->add_option("--pairs", train_args.pairs_path, "training pairs jsonl")->required();
    cmd_train->add_option("--out", train_args.out_path, "output model json")->required();
    cmd_train->add_option("--epochs", train_args.epochs)->default_str("50");
    cmd_train->add_option("--lr", train_args.lr)->default_str("0.05");
    cmd_train->add_option("--batch", train_args.batch)->default_str("16");
    cmd_train->add_option("--seed", train_args.seed)->default_str("0");
    cmd_train->add_option("--l2", train_args.l2)->default_str("0.0001");
    cmd_train->add_option("--dim", train_args.dim, "hashed feature dimension")
        ->default_str("4096");
    cmd_train->add_flag("--no-shuffle", train_args.no_shuffle, "keep epoch order fixed");

    std::string mrs_model, mrs_dataset, mrs_out;
    CLI::App* cmd_mrs = app.add_subcommand("mrscore", "score reports with a trained model");
    cmd_mrs->add_option("--model", mrs_model, "model json")->required();
    cmd_mrs->add_option("--dataset", mrs_dataset, "dataset jsonl")->required();
    cmd_mrs->add_option("--out", mrs_out, "output scores jsonl")->required();

    std::string base_dataset, base_out;
    CLI::App* cmd_base = app.add_subcommand("baselines", "n-gram baseline metrics per report");
    cmd_base->add_option("--dataset", base_dataset, "dataset jsonl")->required();
    cmd_base->add_option("--out", base_out, "output metrics jsonl")->required();

    std::string corr_metrics, corr_human, corr_scatter;
    CLI::App* cmd_corr = app.add_subcommand("correlate", "rank correlations vs human ratings");
    cmd_corr->add_option("--metrics", corr_metrics, "metric columns jsonl (id + numbers)")
        ->required();
    cmd_corr->add_option("--human", corr_human, "human ratings jsonl (id, score)")->required();
    cmd_corr->add_option("--scatter", corr_scatter, "write an SVG scatter grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        CLI::App* active = app.get_subcommands().front();
        log_resolved_config(*active);
        if (active == cmd_gen) return run_gen_data(gen);
        if (active == cmd_pairs) return run_pairs(pairs_dataset, pairs_out);
        if (active == cmd_train) return run_train(train_args);
        if (active == cmd_mrs) return run_mrscore(mrs_model, mrs_dataset, mrs_out);
        if (active == cmd_base) return run_baselines(base_dataset, base_out);
        if (active == cmd_corr) return run_correlate(corr_metrics, corr_human, corr_scatter);
        std::cerr << "usage error: no subcommand\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
