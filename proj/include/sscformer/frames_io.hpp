#pragma once

#include <iosfwd>
#include <string>

#include "sscformer/tensor.hpp"

namespace sscformer {

// Frame file: one frame per line, whitespace-separated decimal reals, lines
// starting with '#' and blank lines ignored. All frames share one width.
struct FrameFile {
    std::size_t frames = 0;
    std::size_t width = 0;
    std::vector<double> values;

    // [frames x width]; throws DimensionError when there are no frames.
    Tensor tensor() const { return Tensor(Shape{frames, width}, values); }
};

// Throws ParseError carrying the 1-based line number.
FrameFile read_frames(std::istream &in);
FrameFile read_frames_file(const std::string &path);

void write_frames(std::ostream &out, const Tensor &rows);

} // namespace sscformer
