// Command-line front end: corpus generation, training, evaluation, ablation
// sweeps, heat-map export and gradient checking. Every command is
// deterministic given --seed; reruns with identical arguments produce
// byte-identical outputs.

#include <algorithm>
#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecopo/checkpoint.hpp"
#include "ecopo/contrastive.hpp"
#include "ecopo/data.hpp"
#include "ecopo/error.hpp"
#include "ecopo/eval.hpp"
#include "ecopo/model.hpp"
#include "ecopo/rng.hpp"
#include "ecopo/train.hpp"
#include "ecopo/utf8.hpp"
#include "ecopo/vocab.hpp"

namespace {

using json = nlohmann::json;
using namespace ecopo;

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016" PRIx64, v);
    return buf;
}

std::string format_double(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open file for writing: " + path);
    }
    out << j.dump(2) << "\n";
    if (!out) {
        throw Error("write failure: " + path);
    }
}

/// Run provenance: a stable hash of the resolved settings plus the seed and
/// input stats. Written next to each command's primary output.
void write_manifest(const std::string& primary_out, const std::string& command,
                    const std::map<std::string, std::string>& settings, std::uint64_t seed,
                    const std::optional<CorpusStats>& stats) {
    std::string canonical;
    for (const auto& [k, v] : settings) {
        canonical += k;
        canonical += '=';
        canonical += v;
        canonical += '\n';
    }
    json j;
    j["format_version"] = 1;
    j["command"] = command;
    j["config_hash"] = hex64(fnv1a(canonical));
    j["seed"] = seed;
    j["settings"] = settings;
    if (stats) {
        j["corpus_stats"] = {{"sentence_count", stats->sentence_count},
                             {"avg_length", stats->avg_length},
                             {"error_count", stats->error_count}};
    }
    write_json_file(primary_out + ".manifest.json", j);
}

std::vector<std::u32string> read_clean_corpus(const std::string& path) {
    std::vector<std::u32string> sentences;
    for (const std::string& line : read_lines(path)) {
        if (line.empty()) continue;
        sentences.push_back(utf8_decode(line));
    }
    if (sentences.empty()) {
        throw FormatError(path + ": no sentences");
    }
    return sentences;
}

/// Co-occurrence corpus: plain text, one sentence per line; in two-column TSV
/// rows the target (second) column is used.
std::vector<std::u32string> read_cooc_corpus(const std::string& path) {
    std::vector<std::u32string> sentences;
    for (const std::string& line : read_lines(path)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        sentences.push_back(
            utf8_decode(tab == std::string::npos ? line : std::string_view(line).substr(tab + 1)));
    }
    return sentences;
}

Vocabulary vocab_from_parallel(std::span<const ParallelSentence> corpus) {
    std::vector<std::u32string> sequences;
    sequences.reserve(corpus.size() * 2);
    for (const auto& s : corpus) {
        sequences.push_back(s.source);
        sequences.push_back(s.target);
    }
    return Vocabulary::from_corpus(sequences);
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) {
        std::cerr << "warning: " << w << "\n";
    }
}

json epoch_stats_json(const std::vector<EpochStats>& epochs) {
    json arr = json::array();
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        arr.push_back({{"epoch", i},
                       {"mean_loss", epochs[i].mean_loss},
                       {"mean_ce", epochs[i].mean_ce},
                       {"mean_cpo", epochs[i].mean_cpo},
                       {"targeted_positions", epochs[i].targeted_positions}});
    }
    return arr;
}

json metrics_json(const MetricsReport& r) {
    return {{"accuracy", r.accuracy}, {"precision", r.precision}, {"recall", r.recall},
            {"f1", r.f1},             {"tp", r.tp},               {"fp", r.fp},
            {"fn", r.fn},             {"tn", r.tn}};
}

// ---------------------------------------------------------------------------
// gen-corpus

struct GenCorpusArgs {
    std::string clean;
    std::string confusion;
    double rate = 0.033;
    std::uint64_t seed = 0;
    std::string out;
    std::string stats;
    bool lenient = false;
};

int run_gen_corpus(const GenCorpusArgs& a) {
    const auto clean = read_clean_corpus(a.clean);
    const Vocabulary vocab = Vocabulary::from_corpus(clean);
    std::vector<std::string> warnings;
    const ConfusionSet confusion =
        ConfusionSet::load(a.confusion, vocab, a.lenient, a.lenient ? &warnings : nullptr);
    print_warnings(warnings);

    const auto corpus = generate_corpus(clean, confusion, a.rate, a.seed);
    save_parallel(corpus, a.out);

    const CorpusStats stats = corpus_stats(corpus);
    json stats_json = {{"format_version", 1},
                       {"sentence_count", stats.sentence_count},
                       {"avg_length", stats.avg_length},
                       {"error_count", stats.error_count}};
    write_json_file(a.stats.empty() ? a.out + ".stats.json" : a.stats, stats_json);

    write_manifest(a.out, "gen-corpus",
                   {{"rate", format_double(a.rate)}, {"lenient", a.lenient ? "1" : "0"}},
                   a.seed, stats);
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::vector<std::string> train_paths;
    std::string loss = "joint";
    std::string out;
    std::string trace;
    std::string init;
    std::int32_t warmup_epochs = 0;
    std::int32_t d_emb = 32;
    std::int32_t hidden = 64;
    std::int32_t window = 2;
    std::string cpo_average = "targeted";
    std::string config_path;
    TrainConfig config;
};

CpoAverage cpo_average_from_string(const std::string& name) {
    if (name == "targeted") return CpoAverage::Targeted;
    if (name == "batch") return CpoAverage::Batch;
    throw ConfigError("unknown cpo-average mode: " + name + " (expected targeted|batch)");
}

std::map<std::string, std::string> train_settings(const TrainArgs& a) {
    return {{"loss", a.loss},
            {"k", std::to_string(a.config.k)},
            {"lambda1", format_double(a.config.lambda1)},
            {"lambda2", format_double(a.config.lambda2)},
            {"batch_size", std::to_string(a.config.batch_size)},
            {"learning_rate", format_double(a.config.learning_rate)},
            {"epochs", std::to_string(a.config.epochs)},
            {"warmup_epochs", std::to_string(a.warmup_epochs)},
            {"d_emb", std::to_string(a.d_emb)},
            {"hidden", std::to_string(a.hidden)},
            {"window", std::to_string(a.window)},
            {"cpo_average", a.cpo_average}};
}

int run_train(const TrainArgs& a) {
    std::vector<ParallelSentence> corpus;
    for (const auto& path : a.train_paths) {
        auto part = load_parallel(path);
        corpus.insert(corpus.end(), std::make_move_iterator(part.begin()),
                      std::make_move_iterator(part.end()));
    }
    if (corpus.empty()) {
        throw FormatError("training corpus is empty");
    }

    const LossKind kind = loss_kind_from_string(a.loss);
    TrainConfig config = a.config;
    config.cpo_average = cpo_average_from_string(a.cpo_average);
    validate(config, kind);
    if (a.warmup_epochs < 0) {
        throw ConfigError("warmup epochs must be >= 0");
    }

    ModelParams params;
    Vocabulary vocab = [&] {
        if (!a.init.empty()) {
            auto [p, v] = load_checkpoint(a.init);
            params = std::move(p);
            return v;
        }
        Vocabulary v = vocab_from_parallel(corpus);
        ModelDims dims{v.size(), a.d_emb, a.hidden, a.window};
        params = ModelParams::init(dims, config.seed);
        return v;
    }();

    // Cross-entropy warm start, then the requested objective. Mirrors the
    // continue-from-a-fitted-model training protocol.
    std::vector<EpochStats> warmup;
    if (a.warmup_epochs > 0) {
        TrainConfig warm = config;
        warm.epochs = a.warmup_epochs;
        warmup = train(params, vocab, corpus, warm, LossKind::Ori).epochs;
    }
    const TrainResult result = train(params, vocab, corpus, config, kind);

    save_checkpoint(params, vocab, a.out);
    if (!a.trace.empty()) {
        json trace = {{"format_version", 1},
                      {"loss", a.loss},
                      {"warmup_epochs", epoch_stats_json(warmup)},
                      {"epochs", epoch_stats_json(result.epochs)}};
        write_json_file(a.trace, trace);
    }
    write_manifest(a.out, "train", train_settings(a), config.seed, corpus_stats(corpus));
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string checkpoint;
    std::string test;
    std::string cooc;
    std::string confusion;
    std::optional<std::uint64_t> threshold;
    double threshold_percentile = 99.5;
    std::string out_metrics;
    std::string out_taxonomy;
    bool lenient = false;
};

int run_eval(const EvalArgs& a) {
    auto [params, vocab] = load_checkpoint(a.checkpoint);
    const auto test = load_parallel(a.test);
    if (test.empty()) {
        throw FormatError("test corpus is empty");
    }
    const auto cooc_corpus = read_cooc_corpus(a.cooc);
    const CooccurrenceTable table = count_cooccurrence(cooc_corpus, vocab);
    std::vector<std::string> warnings;
    const ConfusionSet confusion =
        ConfusionSet::load(a.confusion, vocab, a.lenient, a.lenient ? &warnings : nullptr);
    print_warnings(warnings);

    const std::uint64_t threshold =
        a.threshold ? *a.threshold : std::max<std::uint64_t>(1, table.nonzero_percentile(a.threshold_percentile));

    const auto judgements = judge_corpus(params, vocab, test);
    const MetricsReport detection = sentence_metrics(judgements, MetricLevel::Detection);
    const MetricsReport correction = sentence_metrics(judgements, MetricLevel::Correction);
    const ErrorTaxonomy taxonomy =
        classify_wrong_corrections(judgements, table, confusion, threshold);

    write_json_file(a.out_metrics, json{{"format_version", 1},
                                        {"detection", metrics_json(detection)},
                                        {"correction", metrics_json(correction)}});
    write_json_file(a.out_taxonomy, json{{"format_version", 1},
                                         {"threshold", threshold},
                                         {"common_count", taxonomy.common_count},
                                         {"confusing_count", taxonomy.confusing_count},
                                         {"other_count", taxonomy.other_count},
                                         {"common_share", taxonomy.common_share},
                                         {"confusing_share", taxonomy.confusing_share},
                                         {"other_share", taxonomy.other_share}});
    write_manifest(a.out_metrics, "eval",
                   {{"threshold", std::to_string(threshold)},
                    {"threshold_percentile", format_double(a.threshold_percentile)},
                    {"lenient", a.lenient ? "1" : "0"}},
                   0, corpus_stats(test));
    return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
    std::string parameter;  // k | lambda1 | lambda2
    std::vector<double> values;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> train_paths;
    std::string test;
    std::string out;
    TrainArgs base;  // shared config for every run
};

int run_sweep(const SweepArgs& a) {
    if (a.parameter != "k" && a.parameter != "lambda1" && a.parameter != "lambda2") {
        throw ConfigError("sweep parameter must be one of k|lambda1|lambda2");
    }
    if (a.values.empty()) {
        throw ConfigError("sweep needs at least one value");
    }
    std::vector<double> values = a.values;
    std::sort(values.begin(), values.end());
    if (std::adjacent_find(values.begin(), values.end()) != values.end()) {
        throw ConfigError("sweep values must be distinct");
    }
    if (a.parameter == "k") {
        for (double v : values) {
            if (v < 1 || v != static_cast<double>(static_cast<std::int32_t>(v))) {
                throw ConfigError("K values must be positive integers");
            }
        }
    }
    std::vector<std::uint64_t> seeds = a.seeds;
    if (seeds.empty()) seeds.push_back(0);
    std::sort(seeds.begin(), seeds.end());

    std::vector<ParallelSentence> corpus;
    for (const auto& path : a.train_paths) {
        auto part = load_parallel(path);
        corpus.insert(corpus.end(), std::make_move_iterator(part.begin()),
                      std::make_move_iterator(part.end()));
    }
    if (corpus.empty()) {
        throw FormatError("training corpus is empty");
    }
    const auto test = load_parallel(a.test);
    if (test.empty()) {
        throw FormatError("test corpus is empty");
    }

    const LossKind kind = loss_kind_from_string(a.base.loss);
    const Vocabulary vocab = vocab_from_parallel(corpus);

    std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open sweep output: " + a.out);
    }
    out << "parameter,value,seed,detection_f1,correction_f1\n";
    for (double value : values) {
        for (std::uint64_t seed : seeds) {
            TrainConfig config = a.base.config;
            config.cpo_average = cpo_average_from_string(a.base.cpo_average);
            config.seed = seed;
            if (a.parameter == "k") {
                config.k = static_cast<std::int32_t>(value);
            } else if (a.parameter == "lambda1") {
                config.lambda1 = value;
            } else {
                config.lambda2 = value;
            }
            validate(config, kind);

            ModelDims dims{vocab.size(), a.base.d_emb, a.base.hidden, a.base.window};
            ModelParams params = ModelParams::init(dims, seed);
            if (a.base.warmup_epochs > 0) {
                TrainConfig warm = config;
                warm.epochs = a.base.warmup_epochs;
                train(params, vocab, corpus, warm, LossKind::Ori);
            }
            train(params, vocab, corpus, config, kind);

            const auto judgements = judge_corpus(params, vocab, test);
            const double det_f1 = sentence_metrics(judgements, MetricLevel::Detection).f1;
            const double cor_f1 = sentence_metrics(judgements, MetricLevel::Correction).f1;

            char row[160];
            std::snprintf(row, sizeof(row), "%s,%s,%" PRIu64 ",%.6f,%.6f\n", a.parameter.c_str(),
                          format_double(value).c_str(), seed, det_f1, cor_f1);
            out << row;
        }
    }
    if (!out) {
        throw Error("sweep write failure: " + a.out);
    }
    out.close();

    auto settings = train_settings(a.base);
    settings["parameter"] = a.parameter;
    std::string joined_values;
    for (double v : values) {
        if (!joined_values.empty()) joined_values += ",";
        joined_values += format_double(v);
    }
    settings["values"] = joined_values;
    write_manifest(a.out, "sweep", settings, seeds.front(), corpus_stats(corpus));
    return 0;
}

// ---------------------------------------------------------------------------
// heatmap

struct HeatmapArgs {
    std::string checkpoint;
    std::string source;
    std::string target;
    std::size_t position = 0;
    std::string common;
    std::string confusing;
    std::string out;
};

std::vector<std::int32_t> chars_to_ids(const std::string& utf8_chars, const Vocabulary& vocab,
                                       const char* what) {
    std::vector<std::int32_t> ids;
    for (char32_t c : utf8_decode(utf8_chars)) {
        const auto id = vocab.find(c);
        if (!id) {
            throw ConfigError(std::string(what) + " character not in vocabulary: " + utf8_encode(c));
        }
        ids.push_back(*id);
    }
    return ids;
}

int run_heatmap(const HeatmapArgs& a) {
    auto [params, vocab] = load_checkpoint(a.checkpoint);
    const ParallelSentence sentence =
        make_parallel(utf8_decode(a.source), utf8_decode(a.target));
    const auto common_ids = chars_to_ids(a.common, vocab, "common");
    const auto confusing_ids = chars_to_ids(a.confusing, vocab, "confusing");
    export_heatmap(params, vocab, sentence, a.position, common_ids, confusing_ids, a.out);
    write_manifest(a.out, "heatmap",
                   {{"position", std::to_string(a.position)},
                    {"common", a.common},
                    {"confusing", a.confusing}},
                   0, std::nullopt);
    return 0;
}

// ---------------------------------------------------------------------------
// grad-check

struct GradCheckArgs {
    std::string loss = "joint";
    int samples = 100;
    std::uint64_t seed = 7;
    std::int32_t vocab = 30;
    std::int32_t d_emb = 8;
    std::int32_t hidden = 12;
    std::int32_t window = 2;
    std::int32_t sentences = 4;
    std::int32_t length = 9;
    double tolerance = 1e-4;
    std::string out;
    TrainConfig config;
};

int run_grad_check(const GradCheckArgs& a) {
    if (a.vocab < 4) {
        throw ConfigError("grad-check vocab must be >= 4");
    }
    // Synthetic vocabulary and batch: random targets, sources corrupted at
    // random positions so the contrastive term has work to do.
    std::vector<char32_t> content;
    for (std::int32_t i = 0; i < a.vocab - 2; ++i) {
        content.push_back(static_cast<char32_t>(0x4E00 + i));
    }
    const Vocabulary vocab = Vocabulary::from_content_chars(content);

    Rng rng(mix_seed(a.seed, 1));
    std::vector<ParallelSentence> batch;
    for (std::int32_t s = 0; s < a.sentences; ++s) {
        std::u32string target;
        for (std::int32_t i = 0; i < a.length; ++i) {
            target.push_back(content[static_cast<std::size_t>(rng.below(content.size()))]);
        }
        std::u32string source = target;
        for (auto& c : source) {
            if (rng.uniform() < 0.2) {
                c = content[static_cast<std::size_t>(rng.below(content.size()))];
            }
        }
        batch.push_back(make_parallel(std::move(source), std::move(target)));
    }

    const ModelDims dims{vocab.size(), a.d_emb, a.hidden, a.window};
    const ModelParams params = ModelParams::init(dims, a.seed);
    const LossKind kind = loss_kind_from_string(a.loss);

    const double max_rel =
        grad_check(params, vocab, batch, kind, a.config, a.samples, mix_seed(a.seed, 2));
    const bool pass = max_rel <= a.tolerance;
    std::cout << "loss=" << a.loss << " samples=" << a.samples
              << " max_relative_error=" << format_double(max_rel)
              << " tolerance=" << format_double(a.tolerance) << " " << (pass ? "PASS" : "FAIL")
              << "\n";
    if (!a.out.empty()) {
        write_json_file(a.out, json{{"format_version", 1},
                                    {"loss", a.loss},
                                    {"samples", a.samples},
                                    {"max_relative_error", max_rel},
                                    {"tolerance", a.tolerance},
                                    {"pass", pass}});
    }
    if (!pass) {
        throw Error("gradient check exceeded tolerance: " + format_double(max_rel));
    }
    return 0;
}

// ---------------------------------------------------------------------------

void add_train_config_options(CLI::App* cmd, TrainArgs& args) {
    cmd->add_option("--k", args.config.k, "Negative sample count per position");
    cmd->add_option("--lambda1", args.config.lambda1, "Cross-entropy weight");
    cmd->add_option("--lambda2", args.config.lambda2, "Contrastive weight");
    cmd->add_option("--batch-size", args.config.batch_size, "Mini-batch size");
    cmd->add_option("--lr", args.config.learning_rate, "SGD learning rate");
    cmd->add_option("--epochs", args.config.epochs, "Training epochs");
    cmd->add_option("--seed", args.config.seed, "RNG seed");
    cmd->add_option("--warmup-epochs", args.warmup_epochs,
                    "Cross-entropy-only epochs run before the main objective");
    cmd->add_option("--d-emb", args.d_emb, "Embedding size");
    cmd->add_option("--hidden", args.hidden, "Encoder hidden size");
    cmd->add_option("--window", args.window, "Context half-window");
    cmd->add_option("--cpo-average", args.cpo_average,
                    "Contrastive denominator: targeted|batch");
    cmd->add_option("--config", args.config_path,
                    "Flat key=value config file (flag > file > default)");
}

/// Flat key=value config support. The file's values become forced defaults on
/// the invoked subcommand before parsing, so explicit flags still win:
/// flag > config file > built-in default.
void apply_config_file(CLI::App& app, int argc, char** argv) {
    std::string sub_name;
    std::string config_path;
    for (int i = 1; i < argc; ++i) {
        const std::string_view arg = argv[i];
        if (sub_name.empty() && !arg.starts_with("-")) {
            sub_name = arg;
        } else if (arg == "--config" && i + 1 < argc) {
            config_path = argv[i + 1];
        } else if (arg.starts_with("--config=")) {
            config_path = arg.substr(std::string_view("--config=").size());
        }
    }
    if (config_path.empty() || sub_name.empty()) {
        return;
    }
    CLI::App* sub = app.get_subcommand_no_throw(sub_name);
    if (sub == nullptr) {
        return;  // the parser reports the unknown subcommand itself
    }
    const auto lines = read_lines(config_path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(config_path + ":" + std::to_string(i + 1) +
                              ": expected key=value");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (opt == nullptr || key == "config") {
            throw ConfigError(config_path + ":" + std::to_string(i + 1) +
                              ": unknown config key: " + key);
        }
        opt->default_str(value);
        opt->force_callback();
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Character-level spell-correction trainer with error-driven "
                 "contrastive probability optimization"};
    app.require_subcommand(1);

    GenCorpusArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-corpus",
                                       "Inject confusion-set errors into a clean corpus");
    gen_cmd->add_option("--clean", gen.clean, "Clean text, one sentence per line")->required();
    gen_cmd->add_option("--confusion", gen.confusion, "Confusion set file")->required();
    gen_cmd->add_option("--rate", gen.rate, "Per-position substitution probability");
    gen_cmd->add_option("--seed", gen.seed, "RNG seed");
    gen_cmd->add_option("--out", gen.out, "Output parallel TSV")->required();
    gen_cmd->add_option("--stats", gen.stats, "Stats JSON path (default: <out>.stats.json)");
    gen_cmd->add_flag("--lenient", gen.lenient, "Drop bad confusion entries instead of failing");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train a model on parallel corpora");
    train_cmd->add_option("--train", train_args.train_paths, "Training TSV path(s)")->required();
    train_cmd->add_option("--loss", train_args.loss, "Objective: ori|cpo|joint");
    train_cmd->add_option("--out", train_args.out, "Checkpoint output path")->required();
    train_cmd->add_option("--trace", train_args.trace, "Per-epoch loss trace JSON");
    train_cmd->add_option("--init", train_args.init,
                          "Checkpoint to continue from (model dims come from it)");
    add_train_config_options(train_cmd, train_args);

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a test corpus");
    eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required();
    eval_cmd->add_option("--test", eval_args.test, "Test TSV")->required();
    eval_cmd->add_option("--cooc", eval_args.cooc, "Co-occurrence corpus")->required();
    eval_cmd->add_option("--confusion", eval_args.confusion, "Confusion set file")->required();
    eval_cmd->add_option("--threshold", eval_args.threshold,
                         "Common-character co-occurrence threshold");
    eval_cmd->add_option("--threshold-percentile", eval_args.threshold_percentile,
                         "Percentile of nonzero pair counts used when --threshold is absent");
    eval_cmd->add_option("--out-metrics", eval_args.out_metrics)->required();
    eval_cmd->add_option("--out-taxonomy", eval_args.out_taxonomy)->required();
    eval_cmd->add_flag("--lenient", eval_args.lenient);

    SweepArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "Train+eval over a parameter grid");
    sweep_cmd->add_option("--param", sweep_args.parameter, "k|lambda1|lambda2")->required();
    sweep_cmd->add_option("--values", sweep_args.values, "Grid values")->required()->delimiter(',');
    sweep_cmd->add_option("--seeds", sweep_args.seeds, "Seeds, one run per (value, seed)")
        ->delimiter(',');
    sweep_cmd->add_option("--train", sweep_args.train_paths, "Training TSV path(s)")->required();
    sweep_cmd->add_option("--test", sweep_args.test, "Test TSV")->required();
    sweep_cmd->add_option("--out", sweep_args.out, "Output CSV")->required();
    sweep_cmd->add_option("--loss", sweep_args.base.loss, "Objective: ori|cpo|joint");
    add_train_config_options(sweep_cmd, sweep_args.base);

    HeatmapArgs heatmap_args;
    auto* heatmap_cmd = app.add_subcommand("heatmap",
                                           "Export prediction probabilities for one position");
    heatmap_cmd->add_option("--checkpoint", heatmap_args.checkpoint)->required();
    heatmap_cmd->add_option("--source", heatmap_args.source, "Source sentence")->required();
    heatmap_cmd->add_option("--target", heatmap_args.target, "Gold sentence")->required();
    heatmap_cmd->add_option("--position", heatmap_args.position, "Position of interest")
        ->required();
    heatmap_cmd->add_option("--common", heatmap_args.common, "5 common characters")->required();
    heatmap_cmd->add_option("--confusing", heatmap_args.confusing,
                            "5 confusing characters (must include the gold one)")
        ->required();
    heatmap_cmd->add_option("--out", heatmap_args.out, "Output CSV")->required();

    GradCheckArgs grad_args;
    auto* grad_cmd = app.add_subcommand("grad-check",
                                        "Verify analytic gradients against finite differences");
    grad_cmd->add_option("--loss", grad_args.loss, "ori|cpo|joint");
    grad_cmd->add_option("--samples", grad_args.samples, "Coordinates to probe");
    grad_cmd->add_option("--seed", grad_args.seed);
    grad_cmd->add_option("--vocab", grad_args.vocab, "Synthetic vocabulary size");
    grad_cmd->add_option("--d-emb", grad_args.d_emb);
    grad_cmd->add_option("--hidden", grad_args.hidden);
    grad_cmd->add_option("--window", grad_args.window);
    grad_cmd->add_option("--sentences", grad_args.sentences);
    grad_cmd->add_option("--length", grad_args.length);
    grad_cmd->add_option("--tolerance", grad_args.tolerance);
    grad_cmd->add_option("--k", grad_args.config.k);
    grad_cmd->add_option("--lambda1", grad_args.config.lambda1);
    grad_cmd->add_option("--lambda2", grad_args.config.lambda2);
    grad_cmd->add_option("--out", grad_args.out, "Report JSON path");

    try {
        apply_config_file(app, argc, argv);
        app.parse(argc, argv);
        if (gen_cmd->parsed()) return run_gen_corpus(gen);
        if (train_cmd->parsed()) return run_train(train_args);
        if (eval_cmd->parsed()) return run_eval(eval_args);
        if (sweep_cmd->parsed()) return run_sweep(sweep_args);
        if (heatmap_cmd->parsed()) return run_heatmap(heatmap_args);
        if (grad_cmd->parsed()) return run_grad_check(grad_args);
        return 1;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);  // --help
        }
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
