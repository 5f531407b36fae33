#pragma once

// Completion backends behind a single "prompt in, N strings out" call.

#include "ccport/prompt_engine.hpp"

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ccport {

struct QueryContext {
    TaskId task = TaskId::BoundsInference;
    std::string decl_id;
};

struct CompletionSet {
    std::vector<std::string> completions;
    std::size_t n_requested = 0;
    std::string backend;
};

class Backend {
public:
    virtual ~Backend() = default;
    /// Throws BackendUnavailable or ReplayMiss.
    virtual CompletionSet complete(const QueryContext &ctx, const PromptText &prompt, std::size_t n) = 0;
    virtual std::string name() const = 0;
    /// Mixed into store fingerprints so different model settings never share
    /// cached completions.
    virtual std::string salt() const { return "default"; }
};

/// Store key: sha256 over the salt, n and the rendered prompt.
std::string store_fingerprint(const PromptText &prompt, std::size_t n, const std::string &salt);

/// "default" when neither is set, otherwise "model=<m>;temperature=<t>".
std::string backend_salt(const std::string &model, const std::optional<double> &temperature);

/// One JSON file per fingerprint: {fingerprint, salt, n, prompt, responses}.
/// Entries are never rewritten once present.
class ReplayStore {
public:
    explicit ReplayStore(std::filesystem::path dir);

    const std::filesystem::path &dir() const { return dir_; }
    std::optional<std::vector<std::string>> lookup(const std::string &fingerprint) const;
    /// Returns false (and leaves the file alone) when the entry already exists.
    bool record(const std::string &fingerprint, const std::string &salt, std::size_t n, const std::string &prompt,
                const std::vector<std::string> &responses);
    std::size_t size() const;

private:
    std::filesystem::path file_for(const std::string &fingerprint) const;
    std::filesystem::path dir_;
};

/// Deterministic rule-based responder, see mock_respond.
class MockBackend : public Backend {
public:
    CompletionSet complete(const QueryContext &ctx, const PromptText &prompt, std::size_t n) override;
    std::string name() const override { return "mock"; }
};

class ReplayBackend : public Backend {
public:
    ReplayBackend(std::shared_ptr<ReplayStore> store, std::string salt = "default");
    CompletionSet complete(const QueryContext &ctx, const PromptText &prompt, std::size_t n) override;
    std::string name() const override { return "replay"; }
    std::string salt() const override { return salt_; }

private:
    std::shared_ptr<ReplayStore> store_;
    std::string salt_;
};

struct HttpConfig {
    std::string endpoint; // base URL; requests go to <endpoint>/chat/completions
    std::string api_key;
    std::string model;
    std::optional<double> temperature;
    int attempts = 3;
    std::chrono::milliseconds backoff{1000}; // doubled after every failed attempt
    std::chrono::seconds timeout{300};

    /// Reads CCPORT_ENDPOINT, CCPORT_API_KEY, CCPORT_MODEL.
    static HttpConfig from_env();
};

/// OpenAI-compatible chat completions endpoint, one request asking for `n`
/// choices.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpConfig config);
    CompletionSet complete(const QueryContext &ctx, const PromptText &prompt, std::size_t n) override;
    std::string name() const override { return "http"; }
    std::string salt() const override;

private:
    HttpConfig config_;
};

/// Forwards to `inner` and appends every answer to the store.
class RecordingBackend : public Backend {
public:
    RecordingBackend(std::unique_ptr<Backend> inner, std::shared_ptr<ReplayStore> store);
    CompletionSet complete(const QueryContext &ctx, const PromptText &prompt, std::size_t n) override;
    std::string name() const override { return inner_->name() + "+record"; }
    std::string salt() const override { return inner_->salt(); }

private:
    std::unique_ptr<Backend> inner_;
    std::shared_ptr<ReplayStore> store_;
};

/// The mock's answer to a rendered prompt. Only bounds-inference prompts get
/// blocks; for each listed element the first applicable rule wins:
///   R1  p = malloc(e * sizeof(T)) / calloc(e, sizeof(T))   -> count(e)
///   R2  for (i = 0; i < e; i++) { ... p[i] ... }           -> count(e)
///   R3  a null-terminated scan over p                      -> nt_arr, count(0)
///   R4  p = q with q annotated (possibly by this response)  -> q's bounds
///   R5  otherwise nothing
std::string mock_respond(const PromptText &prompt);

} // namespace ccport
