// Authors replay stores for test fixtures: runs the pipeline with canned
// responses and records every query it makes.
//
// Script format: a line "@@@ <task> <decl-id>" starts a response for that
// query; the response runs until the next such line. Repeated headers give
// several distinct completions (cycled to fill n). Queries without a script
// entry receive an empty response.

#include "ccport/errors.hpp"
#include "ccport/orchestrator.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace ccport;

class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(const std::string &script) {
        std::string key;
        std::ostringstream body;
        auto flush = [&] {
            if (!key.empty())
                answers_[key].push_back(body.str());
            body.str("");
        };
        for (std::string_view line : split_lines(script)) {
            if (line.rfind("@@@ ", 0) == 0) {
                flush();
                std::istringstream hs{std::string(line.substr(4))};
                std::string task, id;
                hs >> task >> id;
                key = task + " " + id;
                continue;
            }
            body << line << "\n";
        }
        flush();
    }

    CompletionSet complete(const QueryContext &ctx, const PromptText &, std::size_t n) override {
        std::string key = std::string(to_string(ctx.task)) + " " + ctx.decl_id;
        used_.insert(key);
        CompletionSet out;
        out.n_requested = n;
        out.backend = name();
        auto it = answers_.find(key);
        for (std::size_t i = 0; i < n; ++i)
            out.completions.push_back(it == answers_.end() ? "" : it->second[i % it->second.size()]);
        return out;
    }
    std::string name() const override { return "scripted"; }

    std::vector<std::string> unused() const {
        std::vector<std::string> out;
        for (const auto &[k, v] : answers_)
            if (!used_.count(k))
                out.push_back(k);
        return out;
    }

private:
    std::map<std::string, std::vector<std::string>> answers_;
    std::set<std::string> used_;
};

std::string slurp(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Record a replay store from scripted responses", "ccport-record"};
    std::string script, cache, out, passes = "1,2,3";
    std::vector<std::string> inputs;
    std::size_t completions = 10;
    app.add_option("--script", script, "Scripted responses")->required();
    app.add_option("--cache", cache, "Replay store to write")->required();
    app.add_option("--input", inputs, "Input files")->required();
    app.add_option("--out", out, "Output directory")->required();
    app.add_option("--passes", passes, "Comma-separated passes");
    app.add_option("--completions", completions, "Completions per query");
    CLI11_PARSE(app, argc, argv);

    try {
        PipelineConfig cfg;
        cfg.inputs = inputs;
        cfg.out_dir = out;
        cfg.options.completions = completions;
        cfg.passes.clear();
        for (char c : passes)
            if (c >= '1' && c <= '3')
                cfg.passes.push_back(c - '0');
        auto scripted = std::make_unique<ScriptedBackend>(slurp(script));
        ScriptedBackend *raw = scripted.get();
        RecordingBackend backend(std::move(scripted), std::make_shared<ReplayStore>(cache));
        PipelineResult result = run_pipeline(cfg, backend);
        std::cout << summary_table(result);
        for (const auto &w : result.warnings)
            std::cerr << "warning: " << w << "\n";
        for (const auto &k : raw->unused())
            std::cerr << "unused script entry: " << k << "\n";
        return raw->unused().empty() ? 0 : 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
