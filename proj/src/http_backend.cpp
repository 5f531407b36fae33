// The only translation unit that includes httplib.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "ccport/errors.hpp"
#include "ccport/llm_gateway.hpp"

#include <json.hpp>

#include <cstdlib>
#include <thread>

namespace ccport {

namespace {

std::string env_or_empty(const char *name) {
    const char *v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

struct Url {
    std::string origin; // scheme://host[:port]
    std::string path;   // without trailing '/'
};

Url split_url(const std::string &endpoint) {
    std::size_t scheme = endpoint.find("://");
    if (scheme == std::string::npos)
        throw BackendUnavailable("endpoint must start with http:// or https://: " + endpoint);
    std::size_t slash = endpoint.find('/', scheme + 3);
    Url u;
    u.origin = endpoint.substr(0, slash);
    u.path = slash == std::string::npos ? "" : endpoint.substr(slash);
    while (!u.path.empty() && u.path.back() == '/')
        u.path.pop_back();
    return u;
}

} // namespace

HttpConfig HttpConfig::from_env() {
    HttpConfig c;
    c.endpoint = env_or_empty("CCPORT_ENDPOINT");
    c.api_key = env_or_empty("CCPORT_API_KEY");
    c.model = env_or_empty("CCPORT_MODEL");
    return c;
}

HttpBackend::HttpBackend(HttpConfig config) : config_(std::move(config)) {}

std::string HttpBackend::salt() const { return backend_salt(config_.model, config_.temperature); }

CompletionSet HttpBackend::complete(const QueryContext &ctx, const PromptText &prompt, std::size_t n) {
    if (config_.endpoint.empty())
        throw BackendUnavailable("no endpoint configured (set CCPORT_ENDPOINT)");
    Url url = split_url(config_.endpoint);

    nlohmann::json body;
    if (!config_.model.empty())
        body["model"] = config_.model;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt.rendered}}});
    body["n"] = n;
    if (config_.temperature)
        body["temperature"] = *config_.temperature;

    httplib::Headers headers;
    if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);

    std::string last_error;
    auto delay = config_.backoff;
    for (int attempt = 1; attempt <= config_.attempts; ++attempt) {
        httplib::Client client(url.origin);
        client.set_connection_timeout(std::chrono::seconds(30));
        client.set_read_timeout(config_.timeout);
        auto res = client.Post(url.path + "/chat/completions", headers, body.dump(), "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
        } else if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
        } else {
            try {
                auto doc = nlohmann::json::parse(res->body);
                CompletionSet set;
                set.n_requested = n;
                set.backend = name();
                for (const auto &choice : doc.at("choices")) {
                    const auto &content = choice.at("message").at("content");
                    set.completions.push_back(content.is_string() ? content.get<std::string>() : std::string());
                }
                if (set.completions.empty())
                    throw BackendUnavailable("response without choices");
                if (set.completions.size() > n)
                    set.completions.resize(n);
                return set;
            } catch (const nlohmann::json::exception &e) {
                last_error = std::string("unreadable response: ") + e.what();
            } catch (const BackendUnavailable &e) {
                last_error = e.what();
            }
        }
        if (attempt < config_.attempts) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
    }
    throw BackendUnavailable("query for " + ctx.decl_id + " failed after " + std::to_string(config_.attempts) +
                             " attempts: " + last_error);
}

} // namespace ccport
