#pragma once

#include "cosm/core.hpp"

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cosm::pcd {

struct FieldDescriptor {
    std::string name;
    int size = 4;      ///< bytes
    char type = 'F';   ///< F, I or U
    int count = 1;
};

struct PcdHeader {
    std::string version;
    std::vector<FieldDescriptor> fields;
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t points = 0;
    std::string viewpoint = "0 0 0 1 0 0 0";
    std::string data_mode = "ascii";  ///< only ascii is accepted
};

class PcdError : public std::runtime_error {
public:
    enum class Kind { MalformedHeader, UnsupportedEncoding, MalformedRecord };

    PcdError(Kind kind, std::size_t line, const std::string& what);

    Kind kind() const { return kind_; }
    /// 1-based line number in the input.
    std::size_t line() const { return line_; }

private:
    Kind kind_;
    std::size_t line_;
};

/// Thrown when a file cannot be opened or read.
class InputUnreadable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string_view to_string(PcdError::Kind kind);

/// Parses an ASCII PCD v0.7 document. Fields other than x, y, z are read and dropped.
std::pair<PcdHeader, PointCloud> parse(std::string_view text);

/// ASCII PCD with FIELDS x y z, SIZE 4 4 4, values printed with 9 significant digits.
/// Throws std::invalid_argument on an empty cloud.
std::string write(const PointCloud& cloud);

PointCloud read_file(const std::filesystem::path& path);
std::pair<PcdHeader, PointCloud> read_file_with_header(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace cosm::pcd
