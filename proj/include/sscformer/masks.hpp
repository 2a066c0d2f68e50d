#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sscformer/chunk_layout.hpp"
#include "sscformer/tensor_math.hpp"

namespace sscformer {

// Attention scope. `global` is the unrestricted baseline used for comparisons.
enum class AttnKind { chunk, ssc, time_restricted, global };

std::string_view to_string(AttnKind kind);
// Throws ConfigError on an unknown name.
AttnKind parse_attn_kind(std::string_view name);

// Query/key admissibility in original token coordinates.
class AttnMask {
  public:
    AttnMask(AttnKind kind, ChunkLayout layout, std::size_t valid_len);

    AttnKind kind() const noexcept { return kind_; }
    const ChunkLayout &layout() const noexcept { return layout_; }
    std::size_t valid_len() const noexcept { return valid_len_; }
    std::size_t size() const noexcept { return layout_.padded_len; }

    bool allows(std::size_t q, std::size_t k) const { return admissible_[q * size() + k] != 0; }
    void set(std::size_t q, std::size_t k, bool value) { admissible_[q * size() + k] = value ? 1 : 0; }

    std::span<const std::uint8_t> row(std::size_t q) const {
        return std::span<const std::uint8_t>(admissible_).subspan(q * size(), size());
    }

    std::size_t count() const;

    // Per-chunk W x W stack in gathered coordinates: block b, entry (i, j)
    // admits position i attending position j of chunk b. For chunk masks the
    // identity plan applies; for ssc masks pass the sampling plan.
    std::vector<BoolVec> local_blocks(const SamplingPlan &plan) const;

    // '1'/'0' grid, one row per query, newline-terminated.
    std::string to_text() const;

    bool operator==(const AttnMask &) const = default;

  private:
    AttnKind kind_;
    ChunkLayout layout_;
    std::size_t valid_len_;
    BoolVec admissible_;
};

// Block-diagonal: same regular chunk.
AttnMask chunk_mask(const ChunkLayout &layout, std::size_t valid_len);

// Same sampled chunk and key chunk not after the query chunk.
AttnMask ssc_mask(const ChunkLayout &layout, const SamplingPlan &plan, std::size_t valid_len);

// Lower block-triangular: current and all previous chunks.
AttnMask time_restricted_mask(const ChunkLayout &layout, std::size_t valid_len);

// Every valid pair.
AttnMask global_mask(const ChunkLayout &layout, std::size_t valid_len);

AttnMask build_mask(AttnKind kind, const ChunkLayout &layout, std::size_t valid_len);

// One freshly built mask per batch element, all over the shared padded length.
std::vector<AttnMask> batched_masks(std::span<const std::size_t> lengths, std::size_t padded_len,
                                    std::size_t chunk_size, AttnKind kind);

} // namespace sscformer
