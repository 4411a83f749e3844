#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "forensics/common.hpp"
#include "forensics/dataset.hpp"

namespace forensics {

enum class PrincipleKind { Profile, Goal, Constraint, Workflow, Style };

std::string_view to_string(PrincipleKind k);

struct PrincipleBlock {
    PrincipleKind kind;
    std::string text;
};

/// A principle-structured prompt. Blocks are kept in canonical
/// Profile -> Goal -> Constraint -> Workflow -> Style order.
struct PromptSpec {
    Stage stage = Stage::Detect;
    std::vector<PrincipleBlock> blocks;
    std::string user_instruction;
    std::optional<int> ladder_rank;

    /// Throws ConfigError on empty blocks, duplicate kinds, out-of-order
    /// blocks, a missing user instruction or a rank outside 1..5.
    void validate() const;
    bool has(PrincipleKind k) const;
    std::string system_text() const;
};

/// Parses the `[profile] ... [user]` block format.
PromptSpec parse_prompt_text(std::string_view text, Stage stage,
                             std::optional<int> ladder_rank = std::nullopt);
PromptSpec load_prompt_file(const std::filesystem::path& path, Stage stage,
                            std::optional<int> ladder_rank = std::nullopt);

/// Locates prompt files inside a prompt directory:
///   detect_rank<N>.txt, analyze.txt, judge.txt
class PromptLibrary {
public:
    explicit PromptLibrary(std::filesystem::path dir) : dir_(std::move(dir)) {}

    PromptSpec detect(int ladder_rank) const;
    PromptSpec analyze() const;
    PromptSpec judge() const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

struct Exemplar {
    std::string id;
    std::filesystem::path image_path;
    std::string assistant_answer;
    Label label = Label::Real;
};

std::vector<Exemplar> load_exemplar_pool(const std::filesystem::path& path);

struct ShotConfig {
    int k = 0;
    std::vector<Exemplar> pool;
    std::uint64_t seed = 0;
};

/// k distinct exemplars, uniform over k-subsets, in draw order. The draw is
/// a partial Fisher-Yates shuffle driven by std::mt19937_64(seed) with
/// rejection-sampled bounded indices, so it is stable across platforms.
std::vector<Exemplar> sample_shots(const ShotConfig& config);

/// Uniform integer in [0, n) from a full-range 64-bit engine by rejection.
/// std::uniform_int_distribution is implementation-defined, so it is
/// avoided anywhere results must be stable.
template <typename Engine>
std::uint64_t bounded_index(Engine& engine, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n + 1) % n;
    for (;;) {
        const std::uint64_t x = engine();
        if (x <= limit) return x % n;
    }
}

/// Uniform double in [0, 1) with 53 random bits.
template <typename Engine>
double unit_double(Engine& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

enum class Role { System, User, Assistant };
std::string_view to_string(Role r);

struct ImagePart {
    std::filesystem::path path;
    std::shared_ptr<const EncodedImage> payload;
};

struct ChatMessage {
    Role role = Role::User;
    std::string text;
    std::vector<ImagePart> images;
};

using MessageSequence = std::vector<ChatMessage>;
using ImageEncoder =
    std::function<std::shared_ptr<const EncodedImage>(const std::filesystem::path&)>;

/// Thread-safe memoizing encoder; exemplar images are shared across every
/// prompt in a run so each file is read once.
class CachingImageEncoder {
public:
    explicit CachingImageEncoder(std::optional<int> max_edge = std::nullopt)
        : max_edge_(max_edge) {}
    std::shared_ptr<const EncodedImage> operator()(const std::filesystem::path& path);

private:
    std::optional<int> max_edge_;
    std::mutex mu_;
    std::map<std::filesystem::path, std::shared_ptr<const EncodedImage>> cache_;
};

ImageEncoder default_image_encoder();

/// [system, (user exemplar, assistant answer)*k, user target].
MessageSequence build_prompt(const PromptSpec& spec, const ShotConfig& shots,
                             const ImageSample& target,
                             const ImageEncoder& encoder = default_image_encoder());

/// Judge prompt: system rubric, then one user turn carrying the location
/// text and the forged, original and mask images (in that order). The
/// `{location}` placeholder in the user instruction is substituted.
MessageSequence build_judge_prompt(const PromptSpec& spec, const std::string& location_text,
                                   const ImageSample& target,
                                   const ImageEncoder& encoder = default_image_encoder());

/// Word/punctuation token count; a tokenizer-free proxy used for ladder
/// ordering and offline usage accounting.
std::size_t approximate_tokens(std::string_view text);

/// Hash over every role, text and image content hash in the sequence.
std::string prompt_fingerprint(const MessageSequence& messages);

}  // namespace forensics
