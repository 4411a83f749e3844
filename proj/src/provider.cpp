#include "forensics/provider.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <thread>

namespace forensics {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ProviderKind k) {
    switch (k) {
        case ProviderKind::Http: return "http";
        case ProviderKind::Mock: return "mock";
        case ProviderKind::Synthetic: return "synthetic";
    }
    return "?";
}

std::optional<ProviderKind> parse_provider_kind(std::string_view s) {
    if (s == "http") return ProviderKind::Http;
    if (s == "mock") return ProviderKind::Mock;
    if (s == "synthetic") return ProviderKind::Synthetic;
    return std::nullopt;
}

void SyntheticBehavior::validate() const {
    for (double p : {yes_rate_fake, yes_rate_real, reject_rate, method_accuracy})
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("synthetic probabilities must be in [0,1]");
}

void ProviderConfig::validate() const {
    if (model_id.empty()) throw ConfigError("model_id must be non-empty");
    if (max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
    if (!(requests_per_minute > 0)) throw ConfigError("requests_per_minute must be positive");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (timeout.count() <= 0) throw ConfigError("timeout must be positive");
    if (kind == ProviderKind::Http && endpoint.empty()) throw ConfigError("http provider needs an endpoint");
    if (kind == ProviderKind::Mock && mock_script.empty()) throw ConfigError("mock provider needs a script");
    if (kind == ProviderKind::Synthetic) synthetic.validate();
}

void to_json(json& j, const SyntheticBehavior& b) {
    j = json{{"yes_rate_fake", b.yes_rate_fake}, {"yes_rate_real", b.yes_rate_real},
             {"reject_rate", b.reject_rate},     {"seed", b.seed},
             {"method_accuracy", b.method_accuracy}, {"judge_scores", b.judge_scores}};
}

void from_json(const json& j, SyntheticBehavior& b) {
    b.yes_rate_fake = j.value("yes_rate_fake", b.yes_rate_fake);
    b.yes_rate_real = j.value("yes_rate_real", b.yes_rate_real);
    b.reject_rate = j.value("reject_rate", b.reject_rate);
    b.seed = j.value("seed", b.seed);
    b.method_accuracy = j.value("method_accuracy", b.method_accuracy);
    if (j.contains("judge_scores")) b.judge_scores = j.at("judge_scores").get<std::array<double, 4>>();
}

void to_json(json& j, const ProviderConfig& c) {
    j = json{{"kind", to_string(c.kind)},
             {"endpoint", c.endpoint},
             {"model", c.model_id},
             {"max_concurrency", c.max_concurrency},
             {"requests_per_minute", c.requests_per_minute},
             {"max_retries", c.max_retries},
             {"timeout_ms", c.timeout.count()},
             {"api_key_env", c.api_key_env},
             {"mock_script", c.mock_script.generic_string()},
             {"synthetic", c.synthetic}};
    j["temperature"] = c.temperature ? json(*c.temperature) : json(nullptr);
    j["max_tokens"] = c.max_tokens ? json(*c.max_tokens) : json(nullptr);
}

void from_json(const json& j, ProviderConfig& c) {
    if (j.contains("kind")) {
        auto k = parse_provider_kind(j.at("kind").get<std::string>());
        if (!k) throw ConfigError("unknown provider kind " + j.at("kind").dump());
        c.kind = *k;
    }
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model_id = j.value("model", c.model_id);
    c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
    c.requests_per_minute = j.value("requests_per_minute", c.requests_per_minute);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.timeout = Millis(j.value("timeout_ms", static_cast<std::int64_t>(c.timeout.count())));
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    if (j.contains("mock_script")) c.mock_script = j.at("mock_script").get<std::string>();
    if (j.contains("synthetic")) c.synthetic = j.at("synthetic").get<SyntheticBehavior>();
    if (j.contains("temperature") && !j.at("temperature").is_null())
        c.temperature = j.at("temperature").get<double>();
    if (j.contains("max_tokens") && !j.at("max_tokens").is_null())
        c.max_tokens = j.at("max_tokens").get<int>();
}

void to_json(json& j, const RoundResponse& r) {
    j = json{{"text", r.raw_text},
             {"latency_ms", r.latency.count()},
             {"prompt_tokens", r.prompt_tokens},
             {"completion_tokens", r.completion_tokens},
             {"round_index", r.round_index}};
}

void from_json(const json& j, RoundResponse& r) {
    r.raw_text = j.at("text").get<std::string>();
    r.latency = Millis(j.value("latency_ms", std::int64_t{0}));
    r.prompt_tokens = j.value("prompt_tokens", std::uint64_t{0});
    r.completion_tokens = j.value("completion_tokens", std::uint64_t{0});
    r.round_index = j.value("round_index", 0);
}

namespace {

std::uint64_t prompt_token_estimate(const MessageSequence& messages) {
    std::uint64_t n = 0;
    for (const auto& m : messages) n += approximate_tokens(m.text) + 4 + 85 * m.images.size();
    return n;
}

RoundResponse offline_response(std::string text, const CompletionRequest& req) {
    RoundResponse r;
    r.completion_tokens = approximate_tokens(text);
    r.prompt_tokens = prompt_token_estimate(req.messages);
    r.raw_text = std::move(text);
    r.round_index = req.round_index;
    return r;
}

}  // namespace

// ---------------------------------------------------------------- mock

MockProvider::MockProvider(std::string model_id, std::map<Key, std::string> script)
    : model_id_(std::move(model_id)), script_(std::move(script)) {}

std::unique_ptr<MockProvider> MockProvider::from_file(const fs::path& path, std::string model_id) {
    std::ifstream in(path);
    if (!in) throw ConfigError("mock script not found: " + path.string());
    std::map<Key, std::string> script;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = json::parse(line);
            auto stage = parse_stage(j.at("stage").get<std::string>());
            if (!stage) throw SchemaError("bad stage");
            script[{j.at("sample_id").get<std::string>(), *stage, j.at("round_index").get<int>()}] =
                j.at("text").get<std::string>();
        } catch (const std::exception& e) {
            throw ConfigError("mock script line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return std::make_unique<MockProvider>(std::move(model_id), std::move(script));
}

void MockProvider::set(const std::string& sample_id, Stage stage, int round_index,
                       std::string text) {
    std::lock_guard lock(mu_);
    script_[{sample_id, stage, round_index}] = std::move(text);
}

RoundResponse MockProvider::complete(const CompletionRequest& req) {
    if (req.cancel && req.cancel->load()) throw RateAbort("cancelled before dispatch");
    calls_[static_cast<std::size_t>(req.stage)].fetch_add(1);
    std::string text;
    {
        std::lock_guard lock(mu_);
        auto it = script_.find({req.sample.id, req.stage, req.round_index});
        if (it == script_.end())
            throw UnscriptedRequest("no scripted response for (" + req.sample.id + ", " +
                                    std::string(to_string(req.stage)) + ", " +
                                    std::to_string(req.round_index) + ")");
        text = it->second;
    }
    return offline_response(std::move(text), req);
}

std::size_t MockProvider::calls(Stage stage) const {
    return calls_[static_cast<std::size_t>(stage)].load();
}

std::size_t MockProvider::total_calls() const {
    return calls_[0].load() + calls_[1].load() + calls_[2].load();
}

// ----------------------------------------------------------- synthetic

namespace {

constexpr std::array<std::string_view, 4> kYesPhrases{
    "Yes.", "Yes, this appears synthesized.", "Yes - the image looks AI-generated.",
    "**Yes**, there are signs of manipulation."};
constexpr std::array<std::string_view, 4> kNoPhrases{
    "No.", "No, this image appears authentic.", "No - lighting and texture look natural.",
    "**No**, I see no evidence of tampering."};
constexpr std::array<std::string_view, 3> kRefusals{
    "I'm sorry, I can't assist with that request.",
    "I am unable to determine whether this image has been altered.",
    "As an AI, I cannot make judgments about the authenticity of images of people."};

template <std::size_t N>
std::string pick(const std::array<std::string_view, N>& options, std::mt19937_64& rng) {
    return std::string(options[bounded_index(rng, N)]);
}

std::string synthetic_report(const ImageSample& s, bool method_correct) {
    Generator g = s.generator;
    if (g == Generator::None) g = Generator::Diffusion;
    if (!method_correct) g = g == Generator::GAN ? Generator::Diffusion : Generator::GAN;
    const bool local = s.scope != Scope::Global;
    std::string out;
    out += "1. **Location of the Tampering Area:**\n";
    out += local ? "   - Absolute: the lower-left quadrant of the image.\n"
                   "   - Relative: to the left of the main subject, near the bottom edge.\n"
                 : "   - Absolute: the whole image.\n   - Relative: every region of the frame.\n";
    out += "2. **Contents of the Tampered Area:**\n   A single object with smooth texture.\n";
    out += "3. **Visible Details in the Tampered Area:**\n"
           "   - Lighting on the object does not match the scene.\n"
           "   - Edges are unnaturally soft.\n";
    out += "4. **Generation Method and Type of the Image:**\n   The artifacts suggest a ";
    out += g == Generator::GAN ? "GAN" : "Diffusion";
    out += "-based method, and this is a ";
    out += local ? "local" : "global";
    out += " forgery.\n";
    return out;
}

std::string format_score(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

}  // namespace

SyntheticProvider::SyntheticProvider(std::string model_id, SyntheticBehavior behavior)
    : model_id_(std::move(model_id)), behavior_(behavior) {
    behavior_.validate();
}

std::size_t SyntheticProvider::calls(Stage stage) const {
    return calls_[static_cast<std::size_t>(stage)].load();
}

RoundResponse SyntheticProvider::complete(const CompletionRequest& req) {
    if (req.cancel && req.cancel->load()) throw RateAbort("cancelled before dispatch");
    calls_[static_cast<std::size_t>(req.stage)].fetch_add(1);
    const std::string key = std::to_string(behavior_.seed) + "|" + req.sample.id + "|" +
                            std::string(to_string(req.stage)) + "|" +
                            std::to_string(req.round_index);
    std::mt19937_64 rng(stable_hash64(key));

    std::string text;
    switch (req.stage) {
        case Stage::Detect: {
            if (unit_double(rng) < behavior_.reject_rate) {
                text = pick(kRefusals, rng);
                break;
            }
            const double yes_rate = req.sample.label == Label::Fake ? behavior_.yes_rate_fake
                                                                    : behavior_.yes_rate_real;
            text = unit_double(rng) < yes_rate ? pick(kYesPhrases, rng) : pick(kNoPhrases, rng);
            break;
        }
        case Stage::Analyze:
            text = synthetic_report(req.sample, unit_double(rng) < behavior_.method_accuracy);
            break;
        case Stage::Judge: {
            const auto& s = behavior_.judge_scores;
            text = "Absolute Position Accuracy: " + format_score(s[0]) +
                   "\nRelative Position Accuracy: " + format_score(s[1]) +
                   "\nReadability: " + format_score(s[2]) +
                   "\nCompleteness: " + format_score(s[3]) + "\n";
            break;
        }
    }
    return offline_response(std::move(text), req);
}

// --------------------------------------------------------------- clocks

void SteadyClock::sleep_until(time_point t, const std::atomic<bool>* cancel) {
    using namespace std::chrono_literals;
    while (std::chrono::steady_clock::now() < t) {
        if (cancel && cancel->load()) throw RateAbort("cancelled while waiting");
        std::this_thread::sleep_until(std::min(t, std::chrono::steady_clock::now() + 100ms));
    }
}

ManualClock::time_point ManualClock::now() {
    std::lock_guard lock(mu_);
    return now_;
}

void ManualClock::sleep_until(time_point t, const std::atomic<bool>* cancel) {
    if (cancel && cancel->load()) throw RateAbort("cancelled while waiting");
    std::lock_guard lock(mu_);
    now_ = std::max(now_, t);
}

void ManualClock::advance(std::chrono::nanoseconds d) {
    std::lock_guard lock(mu_);
    now_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(d);
}

RateLimiter::RateLimiter(double per_minute, Clock& clock)
    : capacity_(static_cast<std::size_t>(std::max(1.0, std::floor(per_minute)))), clock_(clock) {}

Clock::time_point RateLimiter::acquire(const std::atomic<bool>* cancel) {
    using namespace std::chrono_literals;
    std::lock_guard lock(mu_);
    for (;;) {
        if (cancel && cancel->load()) throw RateAbort("cancelled while queued");
        const auto now = clock_.now();
        while (!issued_.empty() && issued_.front() + 60s <= now) issued_.pop_front();
        if (issued_.size() < capacity_) {
            issued_.push_back(now);
            return now;
        }
        clock_.sleep_until(issued_.front() + 60s, cancel);
    }
}

void ConcurrencyGate::acquire(const std::atomic<bool>* cancel) {
    using namespace std::chrono_literals;
    std::unique_lock lock(mu_);
    while (in_flight_ >= limit_) {
        if (cancel && cancel->load()) throw RateAbort("cancelled while queued");
        cv_.wait_for(lock, 100ms);
    }
    ++in_flight_;
    int peak = peak_.load();
    while (in_flight_ > peak && !peak_.compare_exchange_weak(peak, in_flight_)) {
    }
}

void ConcurrencyGate::release() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_one();
}

// ----------------------------------------------------------------- http

json build_chat_request(const ProviderConfig& config, const MessageSequence& messages) {
    json msgs = json::array();
    for (const auto& m : messages) {
        json msg{{"role", to_string(m.role)}};
        if (m.images.empty()) {
            msg["content"] = m.text;
        } else {
            json parts = json::array();
            parts.push_back({{"type", "text"}, {"text", m.text}});
            for (const auto& img : m.images) {
                if (!img.payload) throw DecodeError("image part without payload: " + img.path.string());
                parts.push_back(
                    {{"type", "image_url"}, {"image_url", {{"url", img.payload->data_url()}}}});
            }
            msg["content"] = std::move(parts);
        }
        msgs.push_back(std::move(msg));
    }
    json body{{"model", config.model_id}, {"messages", std::move(msgs)}};
    if (config.temperature) body["temperature"] = *config.temperature;
    if (config.max_tokens) body["max_tokens"] = *config.max_tokens;
    return body;
}

RoundResponse parse_chat_response(const json& body, int round_index) {
    RoundResponse r;
    r.round_index = round_index;
    const auto& choices = body.at("choices");
    if (!choices.is_array() || choices.empty()) throw TransportError("response has no choices");
    const auto& content = choices.at(0).at("message").at("content");
    if (content.is_string()) {
        r.raw_text = content.get<std::string>();
    } else if (content.is_array()) {
        for (const auto& part : content)
            if (part.value("type", "") == "text") r.raw_text += part.value("text", "");
    }
    if (auto it = body.find("usage"); it != body.end() && it->is_object()) {
        r.prompt_tokens = it->value("prompt_tokens", std::uint64_t{0});
        r.completion_tokens = it->value("completion_tokens", std::uint64_t{0});
    }
    return r;
}

Millis backoff_delay(int attempt, double unit_random) {
    const double base_ms = 1000.0;
    const double cap_ms = 60000.0;
    const double ceiling = std::min(cap_ms, base_ms * std::pow(2.0, attempt));
    return Millis(static_cast<std::int64_t>(ceiling / 2 + unit_random * ceiling / 2));
}

HttpProvider::HttpProvider(ProviderConfig config, std::unique_ptr<HttpTransport> transport,
                           std::shared_ptr<Clock> clock)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      clock_(std::move(clock)),
      limiter_(config_.requests_per_minute, *clock_),
      gate_(config_.max_concurrency) {
    config_.validate();
}

std::vector<Clock::time_point> HttpProvider::dispatch_times() const {
    std::lock_guard lock(log_mu_);
    return dispatched_;
}

RoundResponse HttpProvider::complete(const CompletionRequest& req) {
    if (req.messages.empty()) throw PreconditionError("empty message sequence");
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key) throw AuthMissing("environment variable " + config_.api_key_env + " is not set");

    const std::string url = config_.endpoint + "/chat/completions";
    const std::string body = build_chat_request(config_, req.messages).dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        HttpResult res;
        Clock::time_point started;
        {
            ConcurrencyGate::Slot slot(gate_, req.cancel);
            started = limiter_.acquire(req.cancel);
            {
                std::lock_guard lock(log_mu_);
                dispatched_.push_back(started);
            }
            res = transport_->post_json(url, body, key, config_.timeout);
        }
        if (res.status >= 200 && res.status < 300) {
            json parsed;
            try {
                parsed = json::parse(res.body);
            } catch (const json::parse_error& e) {
                throw TransportError(std::string("malformed response body: ") + e.what());
            }
            auto r = parse_chat_response(parsed, req.round_index);
            r.latency = std::chrono::duration_cast<Millis>(clock_->now() - started);
            return r;
        }
        const bool retryable = res.status == 0 || res.status == 429 || res.status >= 500;
        last_error = res.status == 0 ? res.error
                                     : "HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 300);
        if (!retryable) break;
        if (attempt < config_.max_retries) {
            std::mt19937_64 rng(jitter_seed ^ jitter_counter_.fetch_add(1));
            clock_->sleep_until(clock_->now() + backoff_delay(attempt, unit_double(rng)), req.cancel);
        }
    }
    throw TransportError("chat completion failed for " + req.sample.id + ": " + last_error);
}

std::unique_ptr<Provider> make_provider(const ProviderConfig& config) {
    config.validate();
    switch (config.kind) {
        case ProviderKind::Mock:
            return MockProvider::from_file(config.mock_script, config.model_id);
        case ProviderKind::Synthetic:
            return std::make_unique<SyntheticProvider>(config.model_id, config.synthetic);
        case ProviderKind::Http:
            return std::make_unique<HttpProvider>(config, make_httplib_transport());
    }
    throw ConfigError("unknown provider kind");
}

// ----------------------------------------------------------------- cost

PriceTable load_price_table(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file_bytes(path.string()));
    } catch (const json::exception& e) {
        throw ConfigError("price table " + path.string() + ": " + e.what());
    }
    PriceTable table;
    for (const auto& [model, rates] : j.items())
        table[model] = TokenPrice{rates.at("prompt").get<double>(), rates.at("completion").get<double>()};
    return table;
}

double estimate_cost(const std::vector<RoundResponse>& usage, const PriceTable& prices,
                     const std::string& model_id) {
    auto it = prices.find(model_id);
    if (it == prices.end()) throw UnknownModel("no price entry for model " + model_id);
    double total = 0.0;
    for (const auto& r : usage)
        total += static_cast<double>(r.prompt_tokens) * it->second.prompt +
                 static_cast<double>(r.completion_tokens) * it->second.completion;
    return total;
}

}  // namespace forensics
