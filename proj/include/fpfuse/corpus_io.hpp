#pragma once

#include <filesystem>

#include "fpfuse/template_model.hpp"

namespace fpfuse {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file(const std::filesystem::path& path, const std::string& text);

/// Reads one template file in either format.
Template load_template(const std::filesystem::path& path);

/// Writes `subject_<id>/impression_<k>.fpt` files (binary format) under `dir`.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Loads a corpus written in the layout above. Subjects and impressions are
/// ordered numerically by the ids in their names.
Corpus read_corpus(const std::filesystem::path& dir);

std::filesystem::path template_path(const std::filesystem::path& dir, std::uint32_t subject,
                                    std::uint32_t impression);

}  // namespace fpfuse
