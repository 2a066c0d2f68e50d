#include "sscformer/masks.hpp"

namespace sscformer {

std::string_view to_string(AttnKind kind) {
    switch (kind) {
    case AttnKind::chunk:
        return "chunk";
    case AttnKind::ssc:
        return "ssc";
    case AttnKind::time_restricted:
        return "time_restricted";
    case AttnKind::global:
        return "global";
    }
    return "unknown";
}

AttnKind parse_attn_kind(std::string_view name) {
    for (AttnKind kind : {AttnKind::chunk, AttnKind::ssc, AttnKind::time_restricted, AttnKind::global}) {
        if (name == to_string(kind)) {
            return kind;
        }
    }
    throw ConfigError("unknown attention kind '" + std::string(name) + "'");
}

AttnMask::AttnMask(AttnKind kind, ChunkLayout layout, std::size_t valid_len)
    : kind_(kind), layout_(layout), valid_len_(valid_len), admissible_(layout.padded_len * layout.padded_len, 0) {
    if (valid_len > layout.padded_len) {
        throw DimensionError("valid length " + std::to_string(valid_len) + " exceeds padded length " +
                             std::to_string(layout.padded_len));
    }
}

std::size_t AttnMask::count() const {
    std::size_t n = 0;
    for (auto v : admissible_) {
        n += v;
    }
    return n;
}

std::vector<BoolVec> AttnMask::local_blocks(const SamplingPlan &plan) const {
    const std::size_t w = layout_.chunk_size;
    std::vector<BoolVec> blocks(layout_.num_chunks, BoolVec(w * w, 0));
    for (std::size_t b = 0; b < layout_.num_chunks; ++b) {
        for (std::size_t i = 0; i < w; ++i) {
            const std::size_t q = plan.gather[b * w + i];
            for (std::size_t j = 0; j < w; ++j) {
                blocks[b][i * w + j] = allows(q, plan.gather[b * w + j]) ? 1 : 0;
            }
        }
    }
    return blocks;
}

std::string AttnMask::to_text() const {
    std::string out;
    out.reserve(size() * (size() + 1));
    for (std::size_t q = 0; q < size(); ++q) {
        for (std::size_t k = 0; k < size(); ++k) {
            out.push_back(allows(q, k) ? '1' : '0');
        }
        out.push_back('\n');
    }
    return out;
}

namespace {

template <typename Rule>
AttnMask fill_mask(AttnKind kind, const ChunkLayout &layout, std::size_t valid_len, Rule rule) {
    AttnMask mask(kind, layout, valid_len);
    for (std::size_t q = 0; q < valid_len; ++q) {
        for (std::size_t k = 0; k < valid_len; ++k) {
            mask.set(q, k, rule(q, k));
        }
    }
    return mask;
}

} // namespace

AttnMask chunk_mask(const ChunkLayout &layout, std::size_t valid_len) {
    return fill_mask(AttnKind::chunk, layout, valid_len, [&](std::size_t q, std::size_t k) {
        return layout.chunk_index(q) == layout.chunk_index(k);
    });
}

AttnMask ssc_mask(const ChunkLayout &layout, const SamplingPlan &plan, std::size_t valid_len) {
    if (plan.scatter.size() != layout.padded_len) {
        throw DimensionError("sampling plan over " + std::to_string(plan.scatter.size()) +
                             " tokens does not match padded length " + std::to_string(layout.padded_len));
    }
    const std::size_t w = layout.chunk_size;
    return fill_mask(AttnKind::ssc, layout, valid_len, [&](std::size_t q, std::size_t k) {
        const bool same_sampled = plan.scatter[q] / w == plan.scatter[k] / w;
        return same_sampled && layout.chunk_index(k) <= layout.chunk_index(q);
    });
}

AttnMask time_restricted_mask(const ChunkLayout &layout, std::size_t valid_len) {
    return fill_mask(AttnKind::time_restricted, layout, valid_len, [&](std::size_t q, std::size_t k) {
        return layout.chunk_index(k) <= layout.chunk_index(q);
    });
}

AttnMask global_mask(const ChunkLayout &layout, std::size_t valid_len) {
    return fill_mask(AttnKind::global, layout, valid_len, [](std::size_t, std::size_t) { return true; });
}

AttnMask build_mask(AttnKind kind, const ChunkLayout &layout, std::size_t valid_len) {
    switch (kind) {
    case AttnKind::chunk:
        return chunk_mask(layout, valid_len);
    case AttnKind::ssc:
        return ssc_mask(layout, make_sampling_plan(layout), valid_len);
    case AttnKind::time_restricted:
        return time_restricted_mask(layout, valid_len);
    case AttnKind::global:
        return global_mask(layout, valid_len);
    }
    throw ConfigError("invalid attention kind");
}

std::vector<AttnMask> batched_masks(std::span<const std::size_t> lengths, std::size_t padded_len,
                                    std::size_t chunk_size, AttnKind kind) {
    const ChunkLayout layout = make_layout(padded_len, chunk_size);
    if (layout.padded_len != padded_len) {
        throw DimensionError("padded length " + std::to_string(padded_len) + " is not a multiple of chunk size " +
                             std::to_string(chunk_size));
    }
    std::vector<AttnMask> masks;
    masks.reserve(lengths.size());
    for (std::size_t len : lengths) {
        if (len > padded_len) {
            throw DimensionError("sequence length " + std::to_string(len) + " exceeds padded size " +
                                 std::to_string(padded_len));
        }
        masks.push_back(build_mask(kind, layout, len));
    }
    return masks;
}

} // namespace sscformer
