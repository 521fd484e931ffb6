#include "fpfuse/corpus_io.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <optional>

namespace fpfuse {

namespace fs = std::filesystem;

namespace {

std::optional<std::uint32_t> parse_suffix(const std::string& name, const std::string& prefix,
                                          const std::string& suffix)
{
    if (name.size() <= prefix.size() + suffix.size()) return std::nullopt;
    if (name.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
    if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) return std::nullopt;
    const char* first = name.data() + prefix.size();
    const char* last = name.data() + name.size() - suffix.size();
    std::uint32_t v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return v;
}

}  // namespace

std::vector<std::uint8_t> read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_file(const fs::path& path, const std::string& text)
{
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Template load_template(const fs::path& path)
{
    const auto bytes = read_file(path);
    try {
        return read_template(bytes);
    } catch (const DecodeError& e) {
        throw DecodeError(path.string() + ": " + e.what(), e.offset());
    }
}

fs::path template_path(const fs::path& dir, std::uint32_t subject, std::uint32_t impression)
{
    return dir / ("subject_" + std::to_string(subject)) /
           ("impression_" + std::to_string(impression) + ".fpt");
}

void write_corpus(const Corpus& corpus, const fs::path& dir)
{
    fs::create_directories(dir);
    for (const auto& [id, imps] : corpus.subjects) {
        fs::create_directories(dir / ("subject_" + std::to_string(id)));
        for (std::size_t k = 0; k < imps.size(); ++k) {
            write_file(template_path(dir, id, static_cast<std::uint32_t>(k)), encode_binary(imps[k]));
        }
    }
}

Corpus read_corpus(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw std::runtime_error("corpus directory not found: " + dir.string());
    Corpus corpus;
    bool dims_set = false;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_directory()) continue;
        const auto sid = parse_suffix(entry.path().filename().string(), "subject_", "");
        if (!sid) continue;
        std::map<std::uint32_t, fs::path> files;
        for (const auto& f : fs::directory_iterator(entry.path())) {
            const auto k = parse_suffix(f.path().filename().string(), "impression_", ".fpt");
            if (k) files.emplace(*k, f.path());
        }
        auto& imps = corpus.subjects[*sid];
        std::uint32_t expected = 0;
        for (const auto& [k, path] : files) {
            if (k != expected++) {
                throw std::runtime_error("impression numbering has a gap in " + entry.path().string());
            }
            Template t = load_template(path);
            if (!dims_set) {
                corpus.global_dim = static_cast<std::uint32_t>(t.global_dim());
                corpus.minutia_dim = t.minutia_dim;
                dims_set = true;
            } else if (t.global_dim() != corpus.global_dim || t.minutia_dim != corpus.minutia_dim) {
                throw std::runtime_error("template dimensions differ across corpus: " + path.string());
            }
            imps.push_back(std::move(t));
        }
    }
    return corpus;
}

}  // namespace fpfuse
