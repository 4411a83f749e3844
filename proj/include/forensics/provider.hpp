#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "forensics/common.hpp"
#include "forensics/dataset.hpp"
#include "forensics/prompts.hpp"

namespace forensics {

using Millis = std::chrono::milliseconds;

enum class ProviderKind { Http, Mock, Synthetic };
std::string_view to_string(ProviderKind k);
std::optional<ProviderKind> parse_provider_kind(std::string_view s);

/// Ground-truth behaviour of the synthetic responder. The reject draw
/// happens before the yes/no draw in every round.
struct SyntheticBehavior {
    double yes_rate_fake = 0.9;
    double yes_rate_real = 0.1;
    double reject_rate = 0.0;
    std::uint64_t seed = 0;
    // Stage-2 and judge behaviour.
    double method_accuracy = 1.0;
    std::array<double, 4> judge_scores{4, 3, 5, 4};

    void validate() const;
};

struct ProviderConfig {
    ProviderKind kind = ProviderKind::Mock;
    std::string endpoint = "https://api.openai.com/v1";
    std::string model_id = "mock-model";
    int max_concurrency = 4;
    double requests_per_minute = 60.0;
    int max_retries = 5;
    Millis timeout{120000};
    std::string api_key_env = "OPENAI_API_KEY";
    std::optional<double> temperature;
    std::optional<int> max_tokens;
    std::filesystem::path mock_script;
    SyntheticBehavior synthetic;

    void validate() const;
};

void to_json(nlohmann::json& j, const ProviderConfig& c);
void from_json(const nlohmann::json& j, ProviderConfig& c);
void to_json(nlohmann::json& j, const SyntheticBehavior& b);
void from_json(const nlohmann::json& j, SyntheticBehavior& b);

struct RoundResponse {
    std::string raw_text;
    Millis latency{0};
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    int round_index = 0;

    bool operator==(const RoundResponse&) const = default;
};

void to_json(nlohmann::json& j, const RoundResponse& r);
void from_json(const nlohmann::json& j, RoundResponse& r);

struct CompletionRequest {
    const MessageSequence& messages;
    const ImageSample& sample;
    Stage stage;
    int round_index = 0;
    // Caller-owned cancel flag; providers abort queued requests with RateAbort.
    const std::atomic<bool>* cancel = nullptr;
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual RoundResponse complete(const CompletionRequest& request) = 0;
    virtual const std::string& model_id() const = 0;
};

/// Replays scripted responses keyed by (sample id, stage, round index).
class MockProvider : public Provider {
public:
    using Key = std::tuple<std::string, Stage, int>;

    MockProvider(std::string model_id, std::map<Key, std::string> script);
    static std::unique_ptr<MockProvider> from_file(const std::filesystem::path& path, std::string model_id);

    RoundResponse complete(const CompletionRequest& request) override;
    const std::string& model_id() const override { return model_id_; }

    void set(const std::string& sample_id, Stage stage, int round_index, std::string text);
    std::size_t calls(Stage stage) const;
    std::size_t total_calls() const;

private:
    std::string model_id_;
    mutable std::mutex mu_;
    std::map<Key, std::string> script_;
    std::array<std::atomic<std::size_t>, 3> calls_{};
};

/// Draws reject / yes / no per SyntheticBehavior; deterministic in
/// (seed, sample id, stage, round index) and emits realistic phrasings so
/// the parser is exercised end to end.
class SyntheticProvider : public Provider {
public:
    SyntheticProvider(std::string model_id, SyntheticBehavior behavior);

    RoundResponse complete(const CompletionRequest& request) override;
    const std::string& model_id() const override { return model_id_; }
    std::size_t calls(Stage stage) const;

private:
    std::string model_id_;
    SyntheticBehavior behavior_;
    std::array<std::atomic<std::size_t>, 3> calls_{};
};

/// Time source for rate limiting and backoff; swapped for a manual clock in tests.
class Clock {
public:
    using time_point = std::chrono::steady_clock::time_point;
    virtual ~Clock() = default;
    virtual time_point now() = 0;
    virtual void sleep_until(time_point t, const std::atomic<bool>* cancel) = 0;
};

class SteadyClock : public Clock {
public:
    time_point now() override { return std::chrono::steady_clock::now(); }
    void sleep_until(time_point t, const std::atomic<bool>* cancel) override;
};

/// Virtual time: sleeping advances the clock instantly.
class ManualClock : public Clock {
public:
    time_point now() override;
    void sleep_until(time_point t, const std::atomic<bool>* cancel) override;
    void advance(std::chrono::nanoseconds d);

private:
    std::mutex mu_;
    time_point now_{};
};

/// Sliding-window limiter: at most `per_minute` acquisitions in any 60 s
/// window. Acquisition is serialized across callers.
class RateLimiter {
public:
    RateLimiter(double per_minute, Clock& clock);
    Clock::time_point acquire(const std::atomic<bool>* cancel = nullptr);

private:
    std::size_t capacity_;
    Clock& clock_;
    std::mutex mu_;
    std::deque<Clock::time_point> issued_;
};

/// Caps in-flight requests and records the peak for verification.
class ConcurrencyGate {
public:
    explicit ConcurrencyGate(int limit) : limit_(limit) {}
    void acquire(const std::atomic<bool>* cancel = nullptr);
    void release();
    int peak() const { return peak_.load(); }

    class Slot {
    public:
        Slot(ConcurrencyGate& g, const std::atomic<bool>* cancel) : g_(g) { g_.acquire(cancel); }
        ~Slot() { g_.release(); }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;

    private:
        ConcurrencyGate& g_;
    };

private:
    int limit_;
    int in_flight_ = 0;
    std::atomic<int> peak_{0};
    std::mutex mu_;
    std::condition_variable cv_;
};

struct HttpResult {
    int status = 0;  // 0 means transport failure (connect/timeout)
    std::string body;
    std::string error;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResult post_json(const std::string& url, const std::string& body,
                                 const std::string& bearer, Millis timeout) = 0;
};

/// cpp-httplib backed transport (HTTPS when built with OpenSSL).
std::unique_ptr<HttpTransport> make_httplib_transport();

/// OpenAI-compatible /chat/completions client with inline base64 images.
class HttpProvider : public Provider {
public:
    HttpProvider(ProviderConfig config, std::unique_ptr<HttpTransport> transport,
                 std::shared_ptr<Clock> clock = std::make_shared<SteadyClock>());

    RoundResponse complete(const CompletionRequest& request) override;
    const std::string& model_id() const override { return config_.model_id; }

    int peak_in_flight() const { return gate_.peak(); }
    /// Rate-limiter admission time of every request sent, in send order.
    std::vector<Clock::time_point> dispatch_times() const;
    std::uint64_t jitter_seed = 0x5eed;

private:
    ProviderConfig config_;
    std::unique_ptr<HttpTransport> transport_;
    std::shared_ptr<Clock> clock_;
    RateLimiter limiter_;
    ConcurrencyGate gate_;
    std::atomic<std::uint64_t> jitter_counter_{0};
    mutable std::mutex log_mu_;
    std::vector<Clock::time_point> dispatched_;
};

nlohmann::json build_chat_request(const ProviderConfig& config, const MessageSequence& messages);

/// Extracts content and usage from a chat-completions response body.
RoundResponse parse_chat_response(const nlohmann::json& body, int round_index);

/// Backoff before retry `attempt` (0-based): equal jitter over
/// min(60 s, 1 s * 2^attempt).
Millis backoff_delay(int attempt, double unit_random);

std::unique_ptr<Provider> make_provider(const ProviderConfig& config);

struct TokenPrice {
    double prompt = 0.0;      // currency per prompt token
    double completion = 0.0;  // currency per completion token
};
using PriceTable = std::map<std::string, TokenPrice>;

PriceTable load_price_table(const std::filesystem::path& path);

double estimate_cost(const std::vector<RoundResponse>& usage, const PriceTable& prices,
                     const std::string& model_id);

}  // namespace forensics
