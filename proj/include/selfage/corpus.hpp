#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace selfage {

using Timestamp = std::chrono::sys_seconds;

// RFC-3339 ("2019-09-01T12:00:00Z", offsets and fractional seconds accepted;
// fractions are truncated). Throws ValidationError on malformed input.
Timestamp parse_timestamp(std::string_view text);
// Always UTC with a trailing 'Z'.
std::string format_timestamp(Timestamp ts);

struct Post {
  std::string id;
  std::string user_id;
  Timestamp created_at{};
  std::string text;
  bool is_retweet = false;

  friend bool operator==(const Post&, const Post&) = default;
};

enum class Label { NoAge, Age };

std::string_view to_string(Label label);  // "age" / "no_age"
Label parse_label(std::string_view text);

struct LabeledPost {
  Post post;
  Label label = Label::NoAge;
  std::optional<int> age;  // present iff label == Age, in [kMinAge, kMaxAge]

  friend bool operator==(const LabeledPost&, const LabeledPost&) = default;
};

inline constexpr int kMinAge = 10;
inline constexpr int kMaxAge = 99;

enum class PostFormat { Jsonl, Tsv };

PostFormat parse_post_format(std::string_view name);
// Picks TSV for *.tsv, JSONL otherwise.
PostFormat guess_post_format(const std::filesystem::path& path);

// Streaming reader; one Post per record in file order.
class PostReader {
 public:
  PostReader(const std::filesystem::path& path, PostFormat format);
  // Reads from a caller-owned stream that must outlive the reader.
  PostReader(std::istream& in, PostFormat format);
  ~PostReader();
  PostReader(PostReader&&) noexcept;
  PostReader& operator=(PostReader&&) noexcept;

  // Returns false at end of input.
  bool next(Post& out);
  std::size_t line() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<Post> load_posts(const std::filesystem::path& path, PostFormat format);
std::vector<Post> read_posts(std::istream& in, PostFormat format);
void write_posts(std::ostream& out, std::span<const Post> posts, PostFormat format);
void save_posts(const std::filesystem::path& path, std::span<const Post> posts,
                PostFormat format);

// Label TSV: post_id, label (age | no_age), age (empty for no_age). An optional
// header row starting with "post_id" is skipped. Every id must be in `corpus`.
std::vector<LabeledPost> load_labels(const std::filesystem::path& path,
                                     std::span<const Post> corpus);
std::vector<LabeledPost> read_labels(std::istream& in, std::span<const Post> corpus);
void write_labels(std::ostream& out, std::span<const LabeledPost> data);

// Checks the label/age coupling and the age range.
void validate(const LabeledPost& item);

struct SplitResult {
  std::vector<LabeledPost> train;
  std::vector<LabeledPost> test;
  std::uint64_t seed = 0;
};

// Per class: shuffle with a seeded generator, floor(count * fraction) to train,
// the rest to test. Both halves keep input order.
SplitResult stratified_split(std::span<const LabeledPost> data, double train_fraction,
                             std::uint64_t seed);

// Assigns each of `n` items to one of `folds` folds (sizes differ by at most one).
// Returns the item indices of every fold.
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t folds,
                                                    std::uint64_t seed);

}  // namespace selfage
