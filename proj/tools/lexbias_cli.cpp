// lexbias: audit, test and reweight labeled text data for lexical feature-label bias.

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lexbias/lexbias.hpp"

namespace fs = std::filesystem;
using namespace lexbias;
using io::Json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kManifest = "manifest.json";

// ---------------------------------------------------------------------------
// Config files

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Flat "key = value" lines ('#' comments) turned into "--key=value" arguments.
std::vector<std::string> read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    std::vector<std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) throw InputError(path + ":" + std::to_string(lineno) + ": empty key");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        while (!key.empty() && key[0] == '-') key.erase(0, 1);
        std::replace(key.begin(), key.end(), '_', '-');
        out.push_back("--" + key + "=" + value);
    }
    return out;
}

/// Config entries are inserted right after the subcommand name, ahead of the
/// user's own flags; options take the last value given, so flags win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::size_t sub = 1;
    while (sub < args.size() && args[sub].rfind("-", 0) == 0) ++sub;
    if (sub >= args.size()) return args;
    std::optional<std::string> config;
    for (std::size_t k = sub + 1; k < args.size(); ++k) {
        if (args[k] == "--config" && k + 1 < args.size()) config = args[k + 1];
        else if (args[k].rfind("--config=", 0) == 0) config = args[k].substr(9);
    }
    if (!config) return args;
    auto injected = read_config(*config);
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub) + 1, injected.begin(), injected.end());
    return args;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!trim(cur).empty()) out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

// ---------------------------------------------------------------------------
// Run manifest

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char byte[3];
    for (unsigned int k = 0; k < len; ++k) {
        std::snprintf(byte, sizeof byte, "%02x", md[k]);
        hex += byte;
    }
    return hex;
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Final value of every option of a subcommand, defaults included.
Json config_echo(const CLI::App& sub) {
    Json j = Json::object();
    for (const auto* opt : sub.get_options()) {
        const auto name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config") continue;
        const auto& res = opt->results();
        j[name] = res.empty() ? opt->get_default_str() : res.back();
    }
    return j;
}

class Run {
public:
    Run(std::string command, const CLI::App& sub, const std::string& out_dir)
        : command_(std::move(command)), sub_(sub), out_dir_(out_dir), started_(utc_now()) {
        std::error_code ec;
        fs::create_directories(out_dir_, ec);
        if (ec || !fs::is_directory(out_dir_)) throw InputError("cannot create output directory '" + out_dir + "'");
    }

    void input(const std::string& role, const std::string& path) {
        if (!fs::is_regular_file(path)) throw InputError(role + " file '" + path + "' does not exist");
        inputs_.push_back({{"role", role}, {"path", path}, {"sha256", sha256_file(path)}});
    }

    void seed(const std::string& name, std::uint64_t v) { seeds_[name] = v; }

    std::string path(const std::string& name) {
        outputs_.push_back(name);
        return (out_dir_ / name).string();
    }

    /// CSV metadata lines pointing at the manifest.
    io::Meta meta() const { return {{"manifest", kManifest}}; }

    void write_json(const std::string& name, Json body) {
        Json j;
        j["manifest"] = kManifest;
        for (auto& [k, v] : body.items()) j[k] = v;
        auto out = io::open_out(path(name));
        out << j.dump(2) << '\n';
    }

    void finish(const std::vector<std::string>& argv) {
        Json m;
        m["tool"] = "lexbias";
        m["version"] = kVersion;
        m["command"] = command_;
        m["argv"] = argv;
        m["config"] = config_echo(sub_);
        m["seeds"] = seeds_;
        m["inputs"] = inputs_;
        Json outs = Json::array();
        for (const auto& name : outputs_)
            outs.push_back({{"path", name}, {"sha256", sha256_file((out_dir_ / name).string())}});
        m["outputs"] = std::move(outs);
        m["started_at"] = started_;
        m["finished_at"] = utc_now();
        auto out = io::open_out((out_dir_ / kManifest).string());
        out << m.dump(2) << '\n';
    }

private:
    std::string command_;
    const CLI::App& sub_;
    fs::path out_dir_;
    std::string started_;
    Json inputs_ = Json::array();
    Json seeds_ = Json::object();
    std::vector<std::string> outputs_;
};

// ---------------------------------------------------------------------------
// Shared options

struct DataOptions {
    std::string format = "auto";
    std::string text_fields;
    std::string label_field = "label";
    std::string labels;
    std::string skip_labels;
    bool lowercase = true;
    bool strip_punctuation = true;

    void add(CLI::App* app) {
        app->add_option("--format", format, "Input format")->check(CLI::IsMember({"auto", "jsonl", "tsv"}));
        app->add_option("--text-fields", text_fields, "Comma-separated text fields (default: auto-detect)");
        app->add_option("--label-field", label_field, "Label field name");
        app->add_option("--labels", labels, "Comma-separated label order (default: first seen)");
        app->add_option("--skip-labels", skip_labels, "Comma-separated label values whose records are dropped");
        app->add_option("--lowercase", lowercase, "Lowercase tokens");
        app->add_option("--strip-punctuation", strip_punctuation, "Remove Unicode punctuation");
    }

    Schema schema(const std::vector<std::string>& forced_labels = {}) const {
        Schema s;
        s.text_fields = split_list(text_fields);
        s.label_field = label_field;
        s.labels = forced_labels.empty() ? split_list(labels) : forced_labels;
        s.skip_labels = split_list(skip_labels);
        s.tokenizer.lowercase = lowercase;
        s.tokenizer.strip_punctuation = strip_punctuation;
        return s;
    }

    Dataset load(Run& run, const std::string& role, const std::string& path,
                 const std::vector<std::string>& forced_labels = {}) const {
        run.input(role, path);
        const auto s = schema(forced_labels);
        if (format == "auto") return load_dataset(path, s);
        return load_dataset(path, format == "tsv" ? Format::tsv : Format::jsonl, s);
    }
};

StopWords resolve_stop_words(const std::string& spec, const TokenizerOptions& tok, Run& run) {
    if (spec == "none") return {};
    if (spec == "builtin") return builtin_stop_words();
    run.input("stop_words", spec);
    return load_stop_words(spec, tok);
}

std::vector<double> resolve_distribution(const std::string& name, const Dataset& d) {
    return reference_distribution(d, parse_null_kind(name));
}

void write_balance_rows(std::ostream& out, const io::Meta& meta, const FeatureTable& t,
                        const std::vector<std::pair<std::string, const BalanceReport*>>& columns) {
    io::write_meta(out, meta);
    std::vector<std::string> header = {"kind", "key", "doc_count"};
    for (const auto& [name, _] : columns) header.push_back(name);
    out << csv::join(header) << '\n';
    for (std::size_t j = 0; j < t.size(); ++j) {
        std::vector<std::string> row = {to_string(t.kind), t.features[j].key, std::to_string(t.doc_count[j])};
        for (const auto& [_, rep] : columns) {
            const auto& v = rep->per_feature[j];
            row.push_back(v ? csv::format_double(*v) : "");
        }
        out << csv::join(row) << '\n';
    }
}

Json balance_json(const BalanceReport& r) {
    Json j = io::to_json(r);
    j["features"] = r.per_feature.size() - r.excluded;
    return j;
}

// ---------------------------------------------------------------------------
// Commands

struct CommonOptions {
    std::uint64_t seed = 0;
    std::string config;
    std::string out = "lexbias_out";

    void add(CLI::App* app) {
        app->add_option("--seed", seed, "Random seed");
        app->add_option("--config", config, "Flat key=value file of option defaults; flags override it");
        app->add_option("--out", out, "Output directory");
    }
};

struct FeatureOptions {
    std::string kind = "unigram";
    std::optional<std::uint64_t> min_count;
    bool require_all_labels = true;
    std::string stop_words = "none";

    void add(CLI::App* app, const std::string& stop_default, bool require_default, const char* min_help) {
        stop_words = stop_default;
        require_all_labels = require_default;
        app->add_option("--kind", kind, "Feature kind")->check(CLI::IsMember({"unigram", "bigram"}));
        app->add_option("--min-count", min_count, min_help);
        app->add_option("--require-all-labels", require_all_labels,
                        "Keep only features seen with every label");
        app->add_option("--stop-words", stop_words, "Unigram stop words: none, builtin, or a file path");
    }

    FeatureTableOptions resolve(const Dataset& d, Run& run, std::uint64_t unigram_min, std::uint64_t bigram_min) const {
        FeatureTableOptions o;
        o.kind = parse_feature_kind(kind);
        o.min_count = min_count.value_or(o.kind == FeatureKind::unigram ? unigram_min : bigram_min);
        o.require_all_labels = require_all_labels;
        o.stop_words = resolve_stop_words(stop_words, d.tokenizer(), run);
        return o;
    }
};

Json feature_options_json(const FeatureTableOptions& o, const std::string& stop_spec) {
    return {{"kind", to_string(o.kind)},
            {"min_count", o.min_count},
            {"require_all_labels", o.require_all_labels},
            {"stop_words", stop_spec}};
}

struct StatsCommand {
    CommonOptions common;
    DataOptions data;
    FeatureOptions features;
    std::string path;
    std::optional<std::string> reference;
    std::size_t sample = 0;
    std::string weights;

    void add(CLI::App* app) {
        app->add_option("--data", path, "Dataset (JSONL or TSV)")->required();
        common.add(app);
        data.add(app);
        features.add(app, "none", true, "Minimum document count (default 100 for unigrams, 1 for bigrams)");
        app->add_option("--reference", reference,
                        "Balance reference: uniform or empirical (default uniform for unigrams, empirical for bigrams)")
            ->check(CLI::IsMember({"uniform", "empirical"}));
        app->add_option("--sample", sample, "Measure this many randomly sampled eligible bigrams");
        app->add_option("--weights", weights, "Weights file; adds a weighted balance column");
    }

    void run(CLI::App* app, const std::vector<std::string>& argv) {
        Run run("stats", *app, common.out);
        run.seed("sample", common.seed);
        const auto d = data.load(run, "data", path);
        const auto opts = features.resolve(d, run, 100, 1);
        auto table = build_feature_table(d, opts);
        if (sample > 0) table = table.restricted(sample_eligible_bigram_rows(table, sample, common.seed));

        const std::string ref_name = reference.value_or(opts.kind == FeatureKind::unigram ? "uniform" : "empirical");
        const auto ref = resolve_distribution(ref_name, d);
        const auto base = label_balance(table, {}, ref);
        std::optional<BalanceReport> weighted;
        if (!weights.empty()) {
            run.input("weights", weights);
            const auto w = io::read_weights(weights);
            if (w.q.size() != d.size()) throw InputError("weights file covers " + std::to_string(w.q.size()) +
                                                         " instances but the dataset has " + std::to_string(d.size()));
            weighted = label_balance(table, w.q, ref);
        }

        {
            auto out = io::open_out(run.path("feature_table.csv"));
            io::write_feature_table(out, table, d.label_vocab(), run.meta());
        }
        {
            auto out = io::open_out(run.path("balance.csv"));
            std::vector<std::pair<std::string, const BalanceReport*>> cols = {{"err_uniform_weights", &base}};
            if (weighted) cols.emplace_back("err_weighted", &*weighted);
            auto meta = run.meta();
            meta.emplace_back("reference", ref_name);
            write_balance_rows(out, meta, table, cols);
        }
        Json j;
        j["n"] = d.size();
        j["labels"] = d.label_vocab().labels();
        j["features"] = feature_options_json(opts, features.stop_words);
        j["reference"] = ref_name;
        j["reference_distribution"] = ref;
        j["sampled"] = sample > 0 ? Json(sample) : Json(nullptr);
        j["seed"] = common.seed;
        j["uniform_weights"] = balance_json(base);
        if (weighted) {
            j["weighted"] = balance_json(*weighted);
            j["weights_file"] = weights;
        }
        run.write_json("balance.json", std::move(j));
        run.finish(argv);
        std::cout << "features " << table.size() << "  Err(uniform) " << csv::format_double(base.aggregate_err);
        if (weighted) std::cout << "  Err(weighted) " << csv::format_double(weighted->aggregate_err);
        std::cout << '\n';
    }
};

struct SelectCommand {
    CommonOptions common;
    DataOptions data;
    FeatureOptions features;
    std::string path;
    std::size_t k = 50;
    std::string null = "empirical";

    void add(CLI::App* app) {
        app->add_option("--data", path, "Training dataset")->required();
        common.add(app);
        data.add(app);
        features.add(app, "builtin", false, "Minimum document count (default 1)");
        app->add_option("--k", k, "Features per label");
        app->add_option("--null", null, "z-score null proportion")->check(CLI::IsMember({"empirical", "uniform"}));
    }

    void run(CLI::App* app, const std::vector<std::string>& argv) {
        Run run("select-features", *app, common.out);
        const auto d = data.load(run, "data", path);
        const auto opts = features.resolve(d, run, 1, 1);
        const auto table = build_feature_table(d, opts);
        const auto p0 = resolve_distribution(null, d);
        const auto sel = select_top_features(table, p0, k);
        {
            auto out = io::open_out(run.path("feature_stats.csv"));
            auto meta = run.meta();
            meta.emplace_back("k", std::to_string(k));
            meta.emplace_back("null", null);
            io::write_feature_stats(out, sel.features, d.label_vocab(), meta);
        }
        std::vector<std::size_t> per_label(d.num_labels(), 0);
        for (const auto& s : sel.features) ++per_label[s.usual_label];
        Json j;
        j["n"] = d.size();
        j["labels"] = d.label_vocab().labels();
        j["features"] = feature_options_json(opts, features.stop_words);
        j["k"] = k;
        j["null"] = null;
        j["null_distribution"] = p0;
        j["candidates"] = table.size();
        j["selected"] = sel.features.size();
        j["selected_per_usual_label"] = per_label;
        j["warnings"] = sel.warnings;
        run.write_json("selection.json", std::move(j));
        run.finish(argv);
        for (const auto& w : sel.warnings) std::cerr << "warning: " << w << '\n';
        std::cout << "selected " << sel.features.size() << " features\n";
    }
};

struct ReweightCommand {
    CommonOptions common;
    DataOptions data;
    FeatureOptions features;
    OptimizerConfig opt;
    std::string path;
    std::string target = "uniform";

    void add(CLI::App* app) {
        app->add_option("--data", path, "Training dataset")->required();
        common.add(app);
        data.add(app);
        features.add(app, "none", true, "Minimum document count (default 100)");
        app->add_option("--target", target, "Target label distribution")->check(CLI::IsMember({"uniform", "empirical"}));
        app->add_option("--max-steps", opt.max_steps, "Optimizer step limit");
        app->add_option("--step-size", opt.step_size, "Adam step size");
        app->add_option("--beta1", opt.beta1, "Adam first-moment decay");
        app->add_option("--beta2", opt.beta2, "Adam second-moment decay");
        app->add_option("--epsilon", opt.epsilon, "Adam epsilon");
        app->add_option("--tolerance", opt.tolerance, "Stop once the objective reaches this value");
        app->add_option("--window", opt.window, "Steps over which improvement is measured");
        app->add_option("--min-rel-improvement", opt.min_rel_improvement,
                        "Stop when the best objective improves less than this fraction over the window");
    }

    void run(CLI::App* app, const std::vector<std::string>& argv) {
        Run run("reweight", *app, common.out);
        opt.seed = common.seed;
        run.seed("optimizer", common.seed);
        const auto d = data.load(run, "data", path);
        const auto fopts = features.resolve(d, run, 100, 100);
        const auto table = build_feature_table(d, fopts);
        const auto t = resolve_distribution(target, d);
        const auto res = optimize(d, table, t, opt);
        const auto& rep = res.report;

        {
            auto out = io::open_out(run.path("weights.csv"));
            auto meta = run.meta();
            meta.emplace_back("features", std::to_string(table.size()));
            io::write_weights(out, res.weights, t, rep, meta);
        }
        {
            auto out = io::open_out(run.path("objective_trace.csv"));
            io::write_meta(out, run.meta());
            out << "step,objective\n";
            for (std::size_t s = 0; s < rep.objective_trace.size(); ++s)
                out << s << ',' << csv::format_double(rep.objective_trace[s]) << '\n';
        }
        {
            const auto before = label_balance(table, {}, t);
            const auto after = label_balance(table, res.weights.q, t);
            auto out = io::open_out(run.path("balance_before_after.csv"));
            write_balance_rows(out, run.meta(), table, {{"err_before", &before}, {"err_after", &after}});
        }
        Json j;
        j["n"] = d.size();
        j["labels"] = d.label_vocab().labels();
        j["target"] = target;
        j["target_distribution"] = t;
        j["features"] = feature_options_json(fopts, features.stop_words);
        j["eligible_features"] = table.size();
        j["optimizer"] = io::to_json(opt);
        Json r = io::to_json(rep);
        r.erase("objective_trace");
        j["report"] = std::move(r);
        run.write_json("reweight_report.json", std::move(j));
        run.finish(argv);
        for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
        std::cout << "features " << table.size() << "  Err before " << csv::format_double(rep.err_before)
                  << "  after " << csv::format_double(rep.err_after) << "  steps " << rep.steps
                  << (rep.converged ? "  converged" : "  not converged") << '\n';
    }
};

struct PermtestCommand {
    CommonOptions common;
    DataOptions data;
    std::string path;
    std::string stats;
    std::string predictions;
    std::optional<std::size_t> k;
    std::uint64_t monte_carlo = 0;

    void add(CLI::App* app) {
        app->add_option("--data", path, "Evaluation dataset")->required();
        app->add_option("--stats", stats, "Feature stats file from select-features")->required();
        app->add_option("--predictions", predictions, "Predictions file (CSV or JSONL)")->required();
        common.add(app);
        data.add(app);
        app->add_option("--k", k, "Re-select the top k per label from the stats file");
        app->add_option("--monte-carlo", monte_carlo, "Also report a Monte Carlo p-value with this many rounds");
    }

    void run(CLI::App* app, const std::vector<std::string>& argv) {
        Run run("permtest", *app, common.out);
        run.input("stats", stats);
        const auto sf = io::read_feature_stats(stats);
        const auto d = data.load(run, "data", path, sf.labels);
        auto selected = sf.stats;
        std::vector<std::string> warnings;
        if (k) {
            auto sel = select_top(sf.stats, sf.labels.size(), *k);
            selected = std::move(sel.features);
            warnings = std::move(sel.warnings);
        }
        run.input("predictions", predictions);
        const auto preds = io::read_predictions(predictions, d.label_vocab(), d.size());
        const auto pe = pool(d, selected, preds);
        const auto result = exact_log_p(pe);

        Json j = io::to_json(result);
        std::size_t bigrams = 0;
        for (const auto& s : selected) bigrams += s.feature.kind == FeatureKind::bigram;
        j["selection"] = {{"stats_file", stats},
                          {"k", k ? Json(*k) : Json(nullptr)},
                          {"features", selected.size()},
                          {"unigrams", selected.size() - bigrams},
                          {"bigrams", bigrams},
                          {"warnings", warnings}};
        if (monte_carlo > 0) {
            run.seed("monte_carlo", common.seed);
            j["monte_carlo"] = {{"rounds", monte_carlo},
                                {"seed", common.seed},
                                {"p", monte_carlo_p(pe, monte_carlo, common.seed)}};
        }
        run.write_json("result.json", std::move(j));
        run.finish(argv);
        std::cout << "M " << result.M << "  ACC(U) " << csv::format_double(result.acc_U) << "  ACC(N) "
                  << csv::format_double(result.acc_N) << "  log10 p " << csv::format_double(result.log10_p) << '\n';
    }
};

struct ProbeCommand {
    CommonOptions common;
    DataOptions data;
    TrainConfig cfg;
    std::string train_path;
    std::string eval_path;
    std::string weights;

    void add(CLI::App* app) {
        app->add_option("--train", train_path, "Training dataset")->required();
        app->add_option("--eval", eval_path, "Evaluation dataset")->required();
        app->add_option("--weights", weights, "Weights file from reweight (loss multipliers)");
        common.add(app);
        data.add(app);
        app->add_option("--epochs", cfg.epochs, "Training epochs");
        app->add_option("--batch-size", cfg.batch_size, "Mini-batch size");
        app->add_option("--step-size", cfg.step_size, "SGD step size");
        app->add_option("--l2", cfg.l2_strength, "L2 penalty on feature weights");
        app->add_option("--lr-decay", cfg.lr_decay, "Step size at epoch e is step-size / (1 + lr-decay * e)");
    }

    void run(CLI::App* app, const std::vector<std::string>& argv) {
        Run run("probe", *app, common.out);
        cfg.seed = common.seed;
        run.seed("shuffle", common.seed);
        const auto train_d = data.load(run, "train", train_path);
        const auto eval_d = data.load(run, "eval", eval_path, train_d.label_vocab().labels());
        std::vector<double> mult;
        if (!weights.empty()) {
            run.input("weights", weights);
            mult = io::read_weights(weights).multipliers;
            if (mult.size() != train_d.size())
                throw InputError("weights file covers " + std::to_string(mult.size()) +
                                 " instances but the training data has " + std::to_string(train_d.size()));
        }
        const auto res = train(train_d, mult, cfg);
        const auto preds = predict(res.model, eval_d);
        const auto acc = evaluate(preds, eval_d);

        {
            auto out = io::open_out(run.path("model.csv"));
            io::write_model(out, res.model, run.meta());
        }
        {
            auto out = io::open_out(run.path("predictions.csv"));
            io::write_predictions(out, preds, eval_d.label_vocab(), run.meta());
        }
        {
            auto out = io::open_out(run.path("loss_trace.csv"));
            io::write_meta(out, run.meta());
            out << "epoch,loss\n";
            for (std::size_t e = 0; e < res.epoch_loss.size(); ++e)
                out << e << ',' << csv::format_double(res.epoch_loss[e]) << '\n';
        }
        Json j;
        j["train_config"] = io::to_json(cfg);
        j["weighted"] = !weights.empty();
        j["eval"] = io::to_json(acc, eval_d.label_vocab());
        j["train"] = io::to_json(evaluate(res.model, train_d), train_d.label_vocab());
        j["final_loss"] = res.epoch_loss.back();
        run.write_json("accuracy.json", std::move(j));
        run.finish(argv);
        std::cout << "eval accuracy " << csv::format_double(acc.accuracy) << " (" << acc.correct << "/" << acc.n
                  << ")\n";
    }
};

struct SynthCommand {
    CommonOptions common;
    SynthConfig cfg;
    std::size_t n_planted = 50;
    double skew = 0.9;
    std::size_t occurrences = 500;
    double heldout_fraction = 0.0;
    std::size_t min_heldout = 5;

    void add(CLI::App* app) {
        common.add(app);
        app->add_option("--n-instances", cfg.n_instances, "Number of instances");
        app->add_option("--n-labels", cfg.n_labels, "Number of labels");
        app->add_option("--background-vocab", cfg.background_vocab_size, "Background vocabulary size");
        app->add_option("--tokens-per-instance", cfg.tokens_per_instance, "Background tokens per instance");
        app->add_option("--n-planted", n_planted, "Planted tokens, assigned to labels round-robin");
        app->add_option("--skew", skew, "P(target label | planted token present)");
        app->add_option("--occurrences", occurrences, "Instances receiving each planted token");
        app->add_option("--heldout-fraction", heldout_fraction, "Also write a train/held-out split");
        app->add_option("--min-heldout", min_heldout, "Held-out occurrences required of every planted token");
    }

    void run(CLI::App* app, const std::vector<std::string>& argv) {
        Run run("synth", *app, common.out);
        cfg.seed = common.seed;
        cfg.plant(n_planted, skew, occurrences);
        run.seed("generator", common.seed);
        const auto d = generate(cfg);
        write_jsonl(d, run.path("corpus.jsonl"));
        Json j = to_json(cfg);
        if (heldout_fraction > 0.0) {
            if (!(heldout_fraction < 1.0)) throw InputError("heldout-fraction must be in (0, 1)");
            std::vector<std::string> keys;
            for (const auto& p : cfg.planted) keys.push_back(p.token);
            const auto split = split_with_coverage(d, heldout_fraction, common.seed, keys, min_heldout);
            write_jsonl(split.train, run.path("train.jsonl"));
            write_jsonl(split.heldout, run.path("heldout.jsonl"));
            run.seed("split", common.seed);
            j["split"] = {{"heldout_fraction", heldout_fraction},
                          {"min_heldout", min_heldout},
                          {"train", split.train.size()},
                          {"heldout", split.heldout.size()}};
        }
        run.write_json("synth_config.json", std::move(j));
        run.finish(argv);
        std::cout << "wrote " << d.size() << " instances\n";
    }
};

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);

    CLI::App app("Audit labeled text data for lexical feature-label bias", "lexbias");
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();

    StatsCommand stats;
    SelectCommand select;
    ReweightCommand reweight;
    PermtestCommand permtest;
    ProbeCommand probe;
    SynthCommand synth;
    auto* s_stats = app.add_subcommand("stats", "Feature table and label-balance report");
    auto* s_select = app.add_subcommand("select-features", "Top-k z-score features per label");
    auto* s_reweight = app.add_subcommand("reweight", "Solve for balancing instance weights");
    auto* s_perm = app.add_subcommand("permtest", "Exact pooled permutation test on model predictions");
    auto* s_probe = app.add_subcommand("probe", "Train the weighted logistic-regression probe");
    auto* s_synth = app.add_subcommand("synth", "Generate a planted-bias corpus");
    stats.add(s_stats);
    select.add(s_select);
    reweight.add(s_reweight);
    permtest.add(s_perm);
    probe.add(s_probe);
    synth.add(s_synth);

    try {
        auto expanded = expand_config(args);
        std::vector<const char*> cargv;
        for (const auto& a : expanded) cargv.push_back(a.c_str());
        try {
            app.parse(static_cast<int>(cargv.size()), cargv.data());
        } catch (const CLI::ParseError& e) {
            if (e.get_exit_code() == 0) return app.exit(e);
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        }

        if (s_stats->parsed()) stats.run(s_stats, args);
        else if (s_select->parsed()) select.run(s_select, args);
        else if (s_reweight->parsed()) reweight.run(s_reweight, args);
        else if (s_perm->parsed()) permtest.run(s_perm, args);
        else if (s_probe->parsed()) probe.run(s_probe, args);
        else if (s_synth->parsed()) synth.run(s_synth, args);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
