#include "ccport/cli.hpp"

#include "ccport/depgraph.hpp"
#include "ccport/errors.hpp"
#include "ccport/eval.hpp"
#include "ccport/orchestrator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace ccport {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::vector<std::string> inputs;
    std::string manifest;
    std::string out;
    std::string backend = "mock";
    std::size_t completions = 10;
    std::string passes = "1,2,3";
    std::string cache;
    std::size_t budget = kDefaultTokenBudget;
    std::string spelling = "short";
    std::string log_dir;
    std::string gt;
    std::string endpoint;
    std::string model;
    std::optional<double> temperature;
    std::string label;
};

// Exit code 2: bad flags or unreadable input.
class UsageError : public Error {
public:
    using Error::Error;
};

std::vector<std::string> collect_inputs(const Options &o) {
    std::vector<std::string> out;
    for (const auto &in : o.inputs) {
        if (fs::is_directory(in)) {
            std::vector<std::string> found;
            for (const auto &e : fs::recursive_directory_iterator(in)) {
                auto ext = e.path().extension();
                if (e.is_regular_file() && (ext == ".c" || ext == ".h"))
                    found.push_back(e.path().string());
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.push_back(in);
        }
    }
    if (!o.manifest.empty()) {
        auto listed = read_manifest(o.manifest);
        out.insert(out.end(), listed.begin(), listed.end());
    }
    if (out.empty())
        throw UsageError("no input files (use --input or --manifest)");
    return out;
}

// Reading failures of the inputs are input errors, not fatal ones.
std::vector<SourceUnit> read_inputs(const std::vector<std::string> &paths) {
    try {
        return parse_units(paths);
    } catch (const IoError &e) {
        throw UsageError(e.what());
    } catch (const EncodingError &e) {
        throw UsageError(e.what());
    }
}

std::vector<int> parse_passes(const std::string &spec) {
    std::vector<int> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
        if (item != "1" && item != "2" && item != "3")
            throw UsageError("--passes: expected a subset of 1,2,3, got '" + spec + "'");
        int p = item[0] - '0';
        if (!out.empty() && p <= out.back())
            throw UsageError("--passes: passes must be listed in increasing order");
        out.push_back(p);
    }
    if (out.empty())
        throw UsageError("--passes: empty");
    return out;
}

void write_text(const fs::path &path, const std::string &text) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out)
        throw IoError("cannot write " + path.string());
}

std::unique_ptr<Backend> make_backend(const Options &o) {
    if (o.backend == "mock")
        return std::make_unique<MockBackend>();
    if (o.backend == "replay") {
        if (o.cache.empty())
            throw UsageError("--backend replay needs --cache");
        std::string salt = o.model.empty() ? "default" : backend_salt(o.model, o.temperature);
        return std::make_unique<ReplayBackend>(std::make_shared<ReplayStore>(o.cache), salt);
    }
    HttpConfig cfg = HttpConfig::from_env();
    if (!o.endpoint.empty())
        cfg.endpoint = o.endpoint;
    if (!o.model.empty())
        cfg.model = o.model;
    if (o.temperature)
        cfg.temperature = o.temperature;
    if (cfg.endpoint.empty())
        throw UsageError("--backend http needs --endpoint or CCPORT_ENDPOINT");
    std::unique_ptr<Backend> http = std::make_unique<HttpBackend>(cfg);
    if (o.cache.empty())
        return http;
    return std::make_unique<RecordingBackend>(std::move(http), std::make_shared<ReplayStore>(o.cache));
}

int cmd_graph(const Options &o, std::ostream &out) {
    auto units = read_inputs(collect_inputs(o));
    DependencyGraph g = build_graph(extract_declarations(units));
    auto order = bottom_up_order(g);
    std::string json = graph_to_json(g, order);
    if (o.out.empty())
        out << json;
    else
        write_text(o.out, json);
    return 0;
}

int cmd_port(const Options &o, std::ostream &out, std::ostream &err) {
    if (o.out.empty())
        throw UsageError("port needs --out");
    if (o.spelling != "short" && o.spelling != "long")
        throw UsageError("--spelling: expected short or long");
    PipelineConfig cfg;
    cfg.inputs = collect_inputs(o);
    read_inputs(cfg.inputs);
    cfg.out_dir = o.out;
    cfg.passes = parse_passes(o.passes);
    cfg.options.completions = o.completions;
    cfg.options.token_budget = o.budget;
    cfg.long_spelling = o.spelling == "long";
    cfg.log_dir = o.log_dir;
    auto backend = make_backend(o);

    PipelineResult result = run_pipeline(cfg, *backend);
    for (const auto &w : result.warnings)
        err << "warning: " << w << "\n";
    out << summary_table(result);
    out << "backend: " << backend->name() << ", completions: " << o.completions << ", files written: "
        << result.outputs.size() << ", warnings: " << result.warnings.size() << "\n";

    if (!o.log_dir.empty()) {
        nlohmann::ordered_json run;
        run["label"] = o.label;
        run["backend"] = backend->name();
        run["salt"] = backend->salt();
        run["completions"] = o.completions;
        run["passes"] = cfg.passes;
        run["budget"] = o.budget;
        run["spelling"] = o.spelling;
        run["inputs"] = cfg.inputs;
        write_text(fs::path(o.log_dir) / "run.json", run.dump(2) + "\n");
    }
    return 0;
}

int cmd_eval(const Options &o, std::ostream &out, std::ostream &err) {
    if (o.gt.empty())
        throw UsageError("eval needs --gt");
    auto units = read_inputs(collect_inputs(o));
    GroundTruth gt;
    try {
        gt = load_ground_truth(o.gt);
    } catch (const IoError &e) {
        throw UsageError(e.what());
    } catch (const Error &e) {
        throw UsageError(e.what());
    }
    EvalResult r = score(extract_declarations(units), gt);
    for (const auto &m : r.mismatches)
        err << "ground truth mismatch: " << m << "\n";
    std::string report = eval_report(r);
    out << report;
    if (!o.out.empty()) {
        write_text(fs::path(o.out) / "metrics.json", metrics_to_json(r));
        write_text(fs::path(o.out) / "report.txt", report);
    }
    return 0;
}

// Arguments from a key=value file for every long flag the command line did
// not set; the command line wins.
std::vector<std::string> config_arguments(const std::string &path, const std::vector<std::string> &given) {
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_file(path);
    } catch (const CLI::Error &e) {
        throw UsageError("config " + path + ": " + e.what());
    }
    std::vector<std::string> out;
    for (const auto &item : items) {
        std::string flag = "--" + item.name;
        if (item.name == "config" || std::find(given.begin(), given.end(), flag) != given.end())
            continue;
        if (item.name == "input") {
            for (const auto &v : item.inputs) {
                out.push_back(flag);
                out.push_back(v);
            }
            continue;
        }
        std::string joined;
        for (const auto &v : item.inputs)
            joined += (joined.empty() ? "" : ",") + v;
        out.push_back(flag);
        out.push_back(joined);
    }
    return out;
}

} // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    std::vector<std::string> args(argv + 1, argv + argc);

    // --config FILE is expanded before parsing
    std::vector<std::string> given;
    for (const auto &a : args)
        if (a.rfind("--", 0) == 0)
            given.push_back(a.substr(0, a.find('=')));
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<long>(i));
        } else {
            continue;
        }
        try {
            auto extra = config_arguments(path, given);
            auto sub = std::find_if(args.begin(), args.end(),
                                    [](const std::string &a) { return a == "graph" || a == "port" || a == "eval"; });
            args.insert(sub == args.end() ? sub : sub + 1, extra.begin(), extra.end());
        } catch (const UsageError &e) {
            err << "error: " << e.what() << "\n";
            return 2;
        }
        break;
    }

    Options o;
    CLI::App app{"Port C code to Checked C with model-proposed patches", "ccport"};
    app.require_subcommand(1);
    std::string config_path; // expanded above, listed for --help
    app.add_option("--config", config_path, "key=value file mirroring the flags; flags win");
    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--input", o.inputs, "Source file or directory (repeatable)");
        sub->add_option("--manifest", o.manifest, "File listing one input path per line");
        sub->add_option("--out", o.out, "Output directory (port, eval) or file (graph)");
    };
    CLI::App *graph = app.add_subcommand("graph", "Print the dependency graph and visit order as JSON");
    add_common(graph);
    CLI::App *port = app.add_subcommand("port", "Run the transformation passes");
    add_common(port);
    port->add_option("--backend", o.backend, "mock, replay or http")
        ->check(CLI::IsMember({"mock", "replay", "http"}));
    port->add_option("--completions", o.completions, "Completions per query")->check(CLI::Range(1, 1000));
    port->add_option("--passes", o.passes, "Comma-separated subset of 1,2,3");
    port->add_option("--cache", o.cache, "Replay store directory");
    port->add_option("--budget", o.budget, "Prompt token budget")->check(CLI::PositiveNumber);
    port->add_option("--spelling", o.spelling, "Checked pointer spelling: short or long");
    port->add_option("--log-dir", o.log_dir, "Directory for prompts, query records and pass reports");
    port->add_option("--endpoint", o.endpoint, "Chat completions base URL (http backend)");
    port->add_option("--model", o.model, "Model name (http backend; also selects replay entries)");
    port->add_option("--temperature", o.temperature, "Sampling temperature (http backend)");
    port->add_option("--seed-label", o.label, "Free-form run label recorded in the logs");
    CLI::App *eval = app.add_subcommand("eval", "Score an output tree against ground truth");
    add_common(eval);
    eval->add_option("--gt", o.gt, "Ground truth, JSON lines");
    for (auto *sub : {graph, port, eval})
        for (auto *opt : sub->get_options())
            if (opt->get_name() != "--input" && !opt->get_name().empty())
                opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp &e) {
        app.exit(e, out, err);
        return 0;
    } catch (const CLI::ParseError &e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        if (graph->parsed())
            return cmd_graph(o, out);
        if (port->parsed())
            return cmd_port(o, out, err);
        return cmd_eval(o, out, err);
    } catch (const UsageError &e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        err << "fatal: " << e.what() << "\n";
        return 1;
    }
}

} // namespace ccport
