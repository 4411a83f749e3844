#include "forensics/common.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

namespace forensics {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<std::string_view, E>, N>& table,
                        std::string_view s) {
    for (const auto& [name, value] : table) {
        if (name == s) return value;
    }
    return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<std::string_view, E>, N>& table, E v) {
    for (const auto& [name, value] : table) {
        if (value == v) return name;
    }
    return "?";
}

constexpr std::array<std::pair<std::string_view, Label>, 2> kLabels{{
    {"real", Label::Real}, {"fake", Label::Fake}}};
constexpr std::array<std::pair<std::string_view, Generator>, 3> kGenerators{{
    {"none", Generator::None}, {"gan", Generator::GAN}, {"diffusion", Generator::Diffusion}}};
constexpr std::array<std::pair<std::string_view, Scope>, 3> kScopes{{
    {"none", Scope::None}, {"global", Scope::Global}, {"local", Scope::Local}}};
constexpr std::array<std::pair<std::string_view, Content>, 2> kContents{{
    {"general", Content::General}, {"face", Content::Face}}};
constexpr std::array<std::pair<std::string_view, Stage>, 3> kStages{{
    {"detect", Stage::Detect}, {"analyze", Stage::Analyze}, {"judge", Stage::Judge}}};
constexpr std::array<std::pair<std::string_view, Verdict>, 3> kVerdicts{{
    {"yes", Verdict::Yes}, {"no", Verdict::No}, {"reject", Verdict::Reject}}};
constexpr std::array<std::pair<std::string_view, Method>, 3> kMethods{{
    {"gan", Method::GAN}, {"diffusion", Method::Diffusion}, {"unknown", Method::Unknown}}};
constexpr std::array<std::pair<std::string_view, ForgeryType>, 3> kForgeryTypes{{
    {"global", ForgeryType::Global}, {"local", ForgeryType::Local},
    {"unknown", ForgeryType::Unknown}}};

}  // namespace

std::string_view to_string(Label v) { return name_of(kLabels, v); }
std::string_view to_string(Generator v) { return name_of(kGenerators, v); }
std::string_view to_string(Scope v) { return name_of(kScopes, v); }
std::string_view to_string(Content v) { return name_of(kContents, v); }
std::string_view to_string(Stage v) { return name_of(kStages, v); }
std::string_view to_string(Verdict v) { return name_of(kVerdicts, v); }
std::string_view to_string(Method v) { return name_of(kMethods, v); }
std::string_view to_string(ForgeryType v) { return name_of(kForgeryTypes, v); }

std::optional<Label> parse_label(std::string_view s) { return lookup(kLabels, s); }
std::optional<Generator> parse_generator(std::string_view s) { return lookup(kGenerators, s); }
std::optional<Scope> parse_scope(std::string_view s) { return lookup(kScopes, s); }
std::optional<Content> parse_content(std::string_view s) { return lookup(kContents, s); }
std::optional<Stage> parse_stage(std::string_view s) { return lookup(kStages, s); }
std::optional<Verdict> parse_verdict_name(std::string_view s) { return lookup(kVerdicts, s); }
std::optional<Method> parse_method(std::string_view s) { return lookup(kMethods, s); }
std::optional<ForgeryType> parse_forgery_type(std::string_view s) {
    return lookup(kForgeryTypes, s);
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

std::uint64_t stable_hash64(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | digest[i];
    return v;
}

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFile("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace forensics
