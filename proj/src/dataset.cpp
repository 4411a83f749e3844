#include "forensics/dataset.hpp"

#include <fstream>
#include <unordered_set>

#include <openssl/evp.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace forensics {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string require_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(std::string("missing field '") + key + "'");
    if (!it->is_string()) throw SchemaError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

template <typename E, typename Parse>
E require_enum(const json& j, const char* key, Parse parse) {
    auto raw = require_string(j, key);
    auto v = parse(raw);
    if (!v) throw SchemaError(std::string("bad value '") + raw + "' for field '" + key + "'");
    return *v;
}

std::optional<fs::path> optional_path(const json& j, const char* key, const fs::path& base) {
    auto it = j.find(key);
    if (it == j.end()) return std::nullopt;
    if (!it->is_string()) throw SchemaError(std::string("field '") + key + "' must be a string");
    fs::path p = it->get<std::string>();
    return p.is_absolute() ? p : base / p;
}

// Magic-byte sniffing; the extension is not trusted.
std::optional<std::string> sniff_media_type(std::string_view b) {
    auto starts = [&](std::string_view sig) { return b.substr(0, sig.size()) == sig; };
    if (starts("\x89PNG\r\n\x1a\n")) return "image/png";
    if (starts("\xFF\xD8\xFF")) return "image/jpeg";
    if (starts("GIF87a") || starts("GIF89a")) return "image/gif";
    if (b.size() >= 12 && starts("RIFF") && b.substr(8, 4) == "WEBP") return "image/webp";
    if (starts("BM")) return "image/bmp";
    return std::nullopt;
}

std::string extension_for(const std::string& media_type) {
    if (media_type == "image/png") return ".png";
    if (media_type == "image/webp") return ".webp";
    if (media_type == "image/bmp") return ".bmp";
    return ".jpg";  // gif frames are re-encoded as jpeg by OpenCV's writer
}

}  // namespace

void validate_sample(const ImageSample& s) {
    if (s.id.empty()) throw SchemaError("empty sample id");
    if (s.label == Label::Real) {
        if (s.generator != Generator::None || s.scope != Scope::None || s.gt_path || s.mask_path)
            throw SchemaError("sample '" + s.id +
                              "': real samples carry no generator, scope, gt or mask");
    } else {
        if (s.generator == Generator::None)
            throw SchemaError("sample '" + s.id + "': fake samples need a generator");
        if (s.scope == Scope::None)
            throw SchemaError("sample '" + s.id + "': fake samples need a scope");
    }
    if (s.scope == Scope::Local && !s.mask_path)
        throw SchemaError("sample '" + s.id + "': local forgeries require mask_path");
}

const ImageSample* Manifest::find(std::string_view id) const {
    for (const auto& e : entries)
        if (e.id == id) return &e;
    return nullptr;
}

ImageSample sample_from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw SchemaError("manifest line is not a JSON object");
    static const std::unordered_set<std::string> kKnown{
        "id", "image_path", "label", "generator", "scope", "content",
        "dataset_name", "gt_path", "mask_path"};
    for (const auto& [key, _] : j.items())
        if (!kKnown.count(key)) throw SchemaError("unknown field '" + key + "'");

    ImageSample s;
    s.id = require_string(j, "id");
    fs::path img = require_string(j, "image_path");
    s.image_path = img.is_absolute() ? img : base_dir / img;
    s.label = require_enum<Label>(j, "label", parse_label);
    s.generator = require_enum<Generator>(j, "generator", parse_generator);
    s.scope = require_enum<Scope>(j, "scope", parse_scope);
    s.content = require_enum<Content>(j, "content", parse_content);
    s.dataset_name = require_string(j, "dataset_name");
    s.gt_path = optional_path(j, "gt_path", base_dir);
    s.mask_path = optional_path(j, "mask_path", base_dir);
    validate_sample(s);
    return s;
}

json sample_to_json(const ImageSample& s) {
    json j{{"id", s.id},
           {"image_path", s.image_path.generic_string()},
           {"label", to_string(s.label)},
           {"generator", to_string(s.generator)},
           {"scope", to_string(s.scope)},
           {"content", to_string(s.content)},
           {"dataset_name", s.dataset_name}};
    if (s.gt_path) j["gt_path"] = s.gt_path->generic_string();
    if (s.mask_path) j["mask_path"] = s.mask_path->generic_string();
    return j;
}

Manifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile("manifest not found: " + path.string());

    Manifest m;
    m.source_path = path;
    const fs::path base = path.parent_path();
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaError("line " + std::to_string(lineno) + ": " + e.what());
        }
        ImageSample s;
        try {
            s = sample_from_json(j, base);
        } catch (const SchemaError& e) {
            throw SchemaError("line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!seen.insert(s.id).second) throw DuplicateId("duplicate sample id '" + s.id + "'");

        for (const auto* p : {&s.image_path}) {
            if (!fs::is_regular_file(*p))
                throw MissingFile("sample '" + s.id + "': missing " + p->string());
        }
        for (const auto& p : {s.gt_path, s.mask_path}) {
            if (p && !fs::is_regular_file(*p))
                throw MissingFile("sample '" + s.id + "': missing " + p->string());
        }
        m.entries.push_back(std::move(s));
    }
    if (m.entries.empty()) throw SchemaError("manifest is empty: " + path.string());
    return m;
}

std::string base64_encode(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                            reinterpret_cast<const unsigned char*>(bytes.data()),
                            static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

EncodedImage encode_image(const fs::path& path, std::optional<int> max_edge) {
    std::string bytes;
    try {
        bytes = read_file_bytes(path.string());
    } catch (const MissingFile& e) {
        throw DecodeError(e.what());
    }
    auto media = sniff_media_type(bytes);
    if (!media) throw DecodeError("unrecognized image format: " + path.string());

    std::vector<uchar> buf(bytes.begin(), bytes.end());
    cv::Mat img = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
    if (img.empty()) throw DecodeError("cannot decode image: " + path.string());

    EncodedImage out;
    out.content_sha256 = sha256_hex(bytes);
    out.media_type = *media;
    out.width = img.cols;
    out.height = img.rows;

    const int longest = std::max(img.cols, img.rows);
    if (!max_edge || *max_edge <= 0 || longest <= *max_edge) {
        out.base64 = base64_encode(bytes);
        return out;
    }

    const double scale = static_cast<double>(*max_edge) / longest;
    const int w = std::max(1, static_cast<int>(std::lround(img.cols * scale)));
    const int h = std::max(1, static_cast<int>(std::lround(img.rows * scale)));
    cv::Mat resized;
    cv::resize(img, resized, cv::Size(w, h), 0, 0, cv::INTER_AREA);

    if (out.media_type == "image/gif") out.media_type = "image/jpeg";
    std::vector<uchar> encoded;
    std::vector<int> params;
    if (out.media_type == "image/jpeg") params = {cv::IMWRITE_JPEG_QUALITY, 95};
    if (!cv::imencode(extension_for(out.media_type), resized, encoded, params))
        throw DecodeError("cannot re-encode image: " + path.string());
    out.width = w;
    out.height = h;
    out.base64 = base64_encode(std::string_view(reinterpret_cast<const char*>(encoded.data()),
                                                encoded.size()));
    return out;
}

}  // namespace forensics
