#include "sscformer/frames_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace sscformer {

FrameFile read_frames(std::istream &in) {
    FrameFile file;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        std::istringstream fields(line);
        std::string token;
        std::size_t count = 0;
        while (fields >> token) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(token, &used);
            } catch (const std::exception &) {
                used = 0;
            }
            if (used != token.size() || used == 0) {
                throw ParseError("not a real number: '" + token + "'", lineno);
            }
            file.values.push_back(v);
            ++count;
        }
        if (file.frames == 0) {
            file.width = count;
        } else if (count != file.width) {
            throw ParseError("frame has " + std::to_string(count) + " values, expected " + std::to_string(file.width),
                             lineno);
        }
        ++file.frames;
    }
    return file;
}

FrameFile read_frames_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open frame file " + path);
    }
    return read_frames(in);
}

void write_frames(std::ostream &out, const Tensor &rows) {
    char buf[32];
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        const auto row = rows.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
            out << (c == 0 ? "" : " ") << buf;
        }
        out << '\n';
    }
}

} // namespace sscformer
