#include "forensics/prompts.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace forensics {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::pair<std::string_view, PrincipleKind>, 5> kKinds{{
    {"profile", PrincipleKind::Profile},
    {"goal", PrincipleKind::Goal},
    {"constraint", PrincipleKind::Constraint},
    {"workflow", PrincipleKind::Workflow},
    {"style", PrincipleKind::Style},
}};

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string title_of(PrincipleKind k) {
    std::string t(to_string(k));
    t[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
    return t;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
        s.replace(pos, from.size(), to);
    return s;
}

}  // namespace

std::string_view to_string(PrincipleKind k) {
    for (const auto& [name, kind] : kKinds)
        if (kind == k) return name;
    return "?";
}

std::string_view to_string(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "?";
}

void PromptSpec::validate() const {
    int prev = -1;
    for (const auto& b : blocks) {
        if (trim(b.text).empty())
            throw ConfigError("prompt block [" + std::string(to_string(b.kind)) + "] is empty");
        const int idx = static_cast<int>(b.kind);
        if (idx <= prev) throw ConfigError("prompt blocks out of canonical order or duplicated");
        prev = idx;
    }
    if (trim(user_instruction).empty()) throw ConfigError("prompt has no [user] instruction");
    if (ladder_rank && (*ladder_rank < 1 || *ladder_rank > 5))
        throw ConfigError("ladder rank must be in 1..5");
}

bool PromptSpec::has(PrincipleKind k) const {
    return std::any_of(blocks.begin(), blocks.end(),
                       [k](const PrincipleBlock& b) { return b.kind == k; });
}

std::string PromptSpec::system_text() const {
    std::string out;
    for (const auto& b : blocks) {
        if (!out.empty()) out += "\n\n";
        out += "# " + title_of(b.kind) + "\n" + b.text;
    }
    return out;
}

PromptSpec parse_prompt_text(std::string_view text, Stage stage, std::optional<int> ladder_rank) {
    PromptSpec spec;
    spec.stage = stage;
    spec.ladder_rank = ladder_rank;

    std::optional<std::string> current;  // header name
    std::string body;
    bool saw_user = false;
    auto flush = [&] {
        if (!current) {
            if (!trim(body).empty()) throw ConfigError("prompt text before the first block header");
            return;
        }
        if (*current == "user") {
            spec.user_instruction = trim(body);
            saw_user = true;
        } else {
            auto it = std::find_if(kKinds.begin(), kKinds.end(),
                                   [&](const auto& p) { return p.first == *current; });
            spec.blocks.push_back({it->second, trim(body)});
        }
        body.clear();
    };

    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.size() > 2 && t.front() == '[' && t.back() == ']') {
            std::string name = t.substr(1, t.size() - 2);
            std::transform(name.begin(), name.end(), name.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            const bool known =
                name == "user" || std::any_of(kKinds.begin(), kKinds.end(),
                                              [&](const auto& p) { return p.first == name; });
            if (!known) throw ConfigError("unknown prompt block header [" + name + "]");
            flush();
            current = name;
            continue;
        }
        body += line;
        body += '\n';
    }
    flush();
    if (!saw_user) throw ConfigError("prompt has no [user] block");
    spec.validate();
    return spec;
}

PromptSpec load_prompt_file(const fs::path& path, Stage stage, std::optional<int> ladder_rank) {
    std::string text;
    try {
        text = read_file_bytes(path.string());
    } catch (const MissingFile&) {
        throw ConfigError("prompt file not found: " + path.string());
    }
    return parse_prompt_text(text, stage, ladder_rank);
}

PromptSpec PromptLibrary::detect(int ladder_rank) const {
    if (ladder_rank < 1 || ladder_rank > 5) throw ConfigError("ladder rank must be in 1..5");
    return load_prompt_file(dir_ / ("detect_rank" + std::to_string(ladder_rank) + ".txt"),
                            Stage::Detect, ladder_rank);
}

PromptSpec PromptLibrary::analyze() const {
    return load_prompt_file(dir_ / "analyze.txt", Stage::Analyze);
}

PromptSpec PromptLibrary::judge() const {
    return load_prompt_file(dir_ / "judge.txt", Stage::Judge);
}

std::vector<Exemplar> load_exemplar_pool(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile("exemplar pool not found: " + path.string());
    std::vector<Exemplar> pool;
    std::unordered_set<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
            Exemplar e;
            e.id = j.at("id").get<std::string>();
            fs::path img = j.at("image_path").get<std::string>();
            e.image_path = img.is_absolute() ? img : path.parent_path() / img;
            e.assistant_answer = j.at("assistant_answer").get<std::string>();
            auto label = parse_label(j.at("label").get<std::string>());
            if (!label) throw SchemaError("bad exemplar label");
            e.label = *label;
            if (!ids.insert(e.id).second) throw DuplicateId("duplicate exemplar id " + e.id);
            if (!fs::is_regular_file(e.image_path))
                throw MissingFile("exemplar image missing: " + e.image_path.string());
            pool.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw SchemaError("exemplar pool " + path.string() + ": " + ex.what());
        }
    }
    return pool;
}

std::vector<Exemplar> sample_shots(const ShotConfig& config) {
    if (config.k < 0) throw KTooLarge("k must be non-negative");
    const auto n = config.pool.size();
    const auto k = static_cast<std::size_t>(config.k);
    if (k > n)
        throw KTooLarge("k=" + std::to_string(k) + " exceeds pool size " + std::to_string(n));

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 engine(config.seed);
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + bounded_index(engine, n - i);
        std::swap(idx[i], idx[j]);
    }
    std::vector<Exemplar> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(config.pool[idx[i]]);
    return out;
}

std::shared_ptr<const EncodedImage> CachingImageEncoder::operator()(const fs::path& path) {
    {
        std::lock_guard lock(mu_);
        if (auto it = cache_.find(path); it != cache_.end()) return it->second;
    }
    auto encoded = std::make_shared<const EncodedImage>(encode_image(path, max_edge_));
    std::lock_guard lock(mu_);
    return cache_.emplace(path, std::move(encoded)).first->second;
}

ImageEncoder default_image_encoder() {
    return [](const fs::path& p) { return std::make_shared<const EncodedImage>(encode_image(p)); };
}

MessageSequence build_prompt(const PromptSpec& spec, const ShotConfig& shots,
                             const ImageSample& target, const ImageEncoder& encoder) {
    spec.validate();
    MessageSequence out;
    out.push_back({Role::System, spec.system_text(), {}});
    for (const auto& ex : sample_shots(shots)) {
        out.push_back({Role::User, spec.user_instruction, {{ex.image_path, encoder(ex.image_path)}}});
        out.push_back({Role::Assistant, ex.assistant_answer, {}});
    }
    out.push_back(
        {Role::User, spec.user_instruction, {{target.image_path, encoder(target.image_path)}}});
    return out;
}

MessageSequence build_judge_prompt(const PromptSpec& spec, const std::string& location_text,
                                   const ImageSample& target, const ImageEncoder& encoder) {
    spec.validate();
    if (target.scope != Scope::Local || !target.gt_path || !target.mask_path)
        throw PreconditionError("judge requires a local forgery with gt_path and mask_path: " +
                                target.id);
    std::string instruction = spec.user_instruction;
    if (instruction.find("{location}") != std::string::npos)
        instruction = replace_all(instruction, "{location}", location_text);
    else
        instruction += "\n\n" + location_text;

    MessageSequence out;
    out.push_back({Role::System, spec.system_text(), {}});
    out.push_back({Role::User,
                   instruction,
                   {{target.image_path, encoder(target.image_path)},
                    {*target.gt_path, encoder(*target.gt_path)},
                    {*target.mask_path, encoder(*target.mask_path)}}});
    return out;
}

std::size_t approximate_tokens(std::string_view text) {
    std::size_t count = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (std::isalnum(c) || c >= 0x80) {
            while (i < text.size()) {
                const auto d = static_cast<unsigned char>(text[i]);
                if (!(std::isalnum(d) || d >= 0x80)) break;
                ++i;
            }
            ++count;
        } else {
            ++i;
            ++count;
        }
    }
    return count;
}

std::string prompt_fingerprint(const MessageSequence& messages) {
    std::string buf;
    for (const auto& m : messages) {
        buf += to_string(m.role);
        buf += '\x1f';
        buf += m.text;
        for (const auto& img : m.images) {
            buf += '\x1e';
            buf += img.payload ? img.payload->content_sha256 : std::string("-");
        }
        buf += '\x1d';
    }
    return sha256_hex(buf);
}

}  // namespace forensics
