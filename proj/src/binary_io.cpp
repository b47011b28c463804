// Copyright 2026 The latesearch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "late/binary_io.hpp"

#include <zlib.h>

#include <cstdio>
#include <fstream>

namespace late::io {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in chunks
    std::size_t off = 0;
    while (off < bytes.size()) {
        std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
        crc = ::crc32(crc, bytes.data() + off, uInt(n));
        off += n;
    }
    return std::uint32_t(crc);
}

SealedFileWriter::SealedFileWriter(std::filesystem::path path)
        : path_(std::move(path)), file_(std::fopen(path_.c_str(), "wb")), crc_(::crc32(0L, Z_NULL, 0)) {
    if (file_ == nullptr) {
        throw Error(ErrorKind::Io, "cannot open " + path_.string() + " for writing");
    }
}

SealedFileWriter::~SealedFileWriter() {
    if (file_ != nullptr) {
        std::fclose(file_);
    }
}

void SealedFileWriter::write(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) {
        return;
    }
    if (std::fwrite(bytes.data(), 1, bytes.size(), file_) != bytes.size()) {
        throw Error(ErrorKind::Io, path_.string() + " @" + std::to_string(size_) + ": write failed");
    }
    std::size_t off = 0;
    while (off < bytes.size()) {
        std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
        crc_ = ::crc32(uLong(crc_), bytes.data() + off, uInt(n));
        off += n;
    }
    size_ += bytes.size();
}

void SealedFileWriter::close() {
    if (file_ == nullptr) {
        return;
    }
    const auto crc = std::uint32_t(crc_);
    std::uint8_t tail[4];
    std::memcpy(tail, &crc, 4);
    const bool ok = std::fwrite(tail, 1, 4, file_) == 4;
    const bool closed = std::fclose(file_) == 0;
    file_ = nullptr;
    if (!ok || !closed) {
        throw Error(ErrorKind::Io, path_.string() + " @" + std::to_string(size_) + ": close failed");
    }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open " + path.string());
    }
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
        throw Error(ErrorKind::Io, "short read from " + path.string());
    }
    return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) {
        throw Error(ErrorKind::Io, "write failed on " + path.string());
    }
}

void write_file(const std::filesystem::path& path, std::string_view text) {
    write_file(path, std::span<const std::uint8_t>(
                             reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::span<const std::uint8_t> verify_sealed(
        std::span<const std::uint8_t> bytes,
        const std::string& source) {
    if (bytes.size() < 4) {
        throw Error(ErrorKind::MalformedFile, source + ": too short for a checksum");
    }
    auto body = bytes.first(bytes.size() - 4);
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + body.size(), 4);
    if (stored != crc32(body)) {
        throw Error(ErrorKind::ChecksumMismatch, source);
    }
    return body;
}

namespace {
constexpr std::string_view kCrcTag = "#crc32 ";

std::span<const std::uint8_t> as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}
} // namespace

std::string seal_text(std::string text) {
    char line[32];
    std::snprintf(line, sizeof(line), "%08x\n", crc32(as_bytes(text)));
    text += kCrcTag;
    text += line;
    return text;
}

std::string verify_sealed_text(std::string_view text, const std::string& source) {
    // the last line is "#crc32 xxxxxxxx\n"
    constexpr std::size_t kLine = 7 + 8 + 1;
    if (text.size() < kLine || text.substr(text.size() - kLine, kCrcTag.size()) != kCrcTag ||
        text.back() != '\n') {
        throw Error(ErrorKind::MalformedFile, source + ": missing checksum line");
    }
    std::string_view body = text.substr(0, text.size() - kLine);
    std::string hex(text.substr(text.size() - 9, 8));
    char* end = nullptr;
    unsigned long stored = std::strtoul(hex.c_str(), &end, 16);
    if (end != hex.c_str() + 8) {
        throw Error(ErrorKind::MalformedFile, source + ": bad checksum line");
    }
    if (std::uint32_t(stored) != crc32(as_bytes(body))) {
        throw Error(ErrorKind::ChecksumMismatch, source);
    }
    return std::string(body);
}

} // namespace late::io
