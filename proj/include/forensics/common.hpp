#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace forensics {

inline constexpr int kSchemaVersion = 1;

enum class Label { Real, Fake };
enum class Generator { None, GAN, Diffusion };
enum class Scope { None, Global, Local };
enum class Content { General, Face };
enum class Stage { Detect, Analyze, Judge };
enum class Verdict { Yes, No, Reject };
enum class Method { GAN, Diffusion, Unknown };
enum class ForgeryType { Global, Local, Unknown };

std::string_view to_string(Label v);
std::string_view to_string(Generator v);
std::string_view to_string(Scope v);
std::string_view to_string(Content v);
std::string_view to_string(Stage v);
std::string_view to_string(Verdict v);
std::string_view to_string(Method v);
std::string_view to_string(ForgeryType v);

// Parsers accept the lowercase wire spelling only; nullopt otherwise.
std::optional<Label> parse_label(std::string_view s);
std::optional<Generator> parse_generator(std::string_view s);
std::optional<Scope> parse_scope(std::string_view s);
std::optional<Content> parse_content(std::string_view s);
std::optional<Stage> parse_stage(std::string_view s);
std::optional<Verdict> parse_verdict_name(std::string_view s);
std::optional<Method> parse_method(std::string_view s);
std::optional<ForgeryType> parse_forgery_type(std::string_view s);

/// Base of every error the library raises. `kind()` is a stable,
/// machine-readable tag that the CLI writes into its error JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define FORENSICS_DEFINE_ERROR(Name)                                       \
    class Name : public Error {                                            \
    public:                                                                \
        explicit Name(const std::string& what) : Error(#Name, what) {}     \
    }

FORENSICS_DEFINE_ERROR(MissingFile);
FORENSICS_DEFINE_ERROR(SchemaError);
FORENSICS_DEFINE_ERROR(DuplicateId);
FORENSICS_DEFINE_ERROR(DecodeError);
FORENSICS_DEFINE_ERROR(KTooLarge);
FORENSICS_DEFINE_ERROR(TransportError);
FORENSICS_DEFINE_ERROR(AuthMissing);
FORENSICS_DEFINE_ERROR(UnscriptedRequest);
FORENSICS_DEFINE_ERROR(RateAbort);
FORENSICS_DEFINE_ERROR(UnknownModel);
FORENSICS_DEFINE_ERROR(OneClassOnly);
FORENSICS_DEFINE_ERROR(JudgeParseError);
FORENSICS_DEFINE_ERROR(ToleranceExceeded);
FORENSICS_DEFINE_ERROR(PreconditionError);
FORENSICS_DEFINE_ERROR(ConfigError);
FORENSICS_DEFINE_ERROR(ReplayMiss);

#undef FORENSICS_DEFINE_ERROR

/// Hex SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view bytes);

/// Stable 64-bit seed derived from a string (first 8 bytes of SHA-256).
std::uint64_t stable_hash64(std::string_view bytes);

std::string read_file_bytes(const std::string& path);

}  // namespace forensics
