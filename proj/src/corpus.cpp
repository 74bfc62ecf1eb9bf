#include "selfage/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "selfage/error.hpp"
#include "selfage/shuffle.hpp"

namespace selfage {

namespace {

using json = nlohmann::json;

bool parse_fixed_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > text.size()) return false;
  int value = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') return false;
    value = value * 10 + (c - '0');
  }
  out = value;
  return true;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::string tsv_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (const char c : text) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tsv_unescape(std::string_view text, std::size_t line) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\') {
      out += text[i];
      continue;
    }
    if (++i == text.size()) throw ParseError("dangling escape in TSV field", line);
    switch (text[i]) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case '\\': out += '\\'; break;
      default: throw ParseError(std::string("unknown TSV escape \\") + text[i], line);
    }
  }
  return out;
}

bool parse_bool(std::string_view text, std::size_t line) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0" || text.empty()) return false;
  throw ParseError("invalid boolean '" + std::string(text) + "'", line);
}

std::string json_string_field(const json& record, const char* key, std::size_t line) {
  const auto it = record.find(key);
  if (it == record.end() || it->is_null()) {
    throw ParseError(std::string("missing field '") + key + "'", line);
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return it->dump();
  throw ParseError(std::string("field '") + key + "' must be a string", line);
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  const auto fail = [&]() -> ValidationError {
    return ValidationError("invalid RFC-3339 timestamp '" + std::string(text) + "'");
  };
  int y, mo, d, h, mi, s;
  if (text.size() < 20 || !parse_fixed_int(text, 0, 4, y) || text[4] != '-' ||
      !parse_fixed_int(text, 5, 2, mo) || text[7] != '-' ||
      !parse_fixed_int(text, 8, 2, d) || (text[10] != 'T' && text[10] != 't' && text[10] != ' ') ||
      !parse_fixed_int(text, 11, 2, h) || text[13] != ':' ||
      !parse_fixed_int(text, 14, 2, mi) || text[16] != ':' ||
      !parse_fixed_int(text, 17, 2, s)) {
    throw fail();
  }
  std::size_t pos = 19;
  if (text[pos] == '.') {
    ++pos;
    const std::size_t digits_start = pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    if (pos == digits_start) throw fail();
  }
  int offset_minutes = 0;
  if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
    ++pos;
  } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    int oh, om;
    if (!parse_fixed_int(text, pos + 1, 2, oh) || pos + 3 >= text.size() ||
        text[pos + 3] != ':' || !parse_fixed_int(text, pos + 4, 2, om) || oh > 23 || om > 59) {
      throw fail();
    }
    offset_minutes = (oh * 60 + om) * (text[pos] == '-' ? -1 : 1);
    pos += 6;
  } else {
    throw fail();
  }
  if (pos != text.size()) throw fail();

  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) throw fail();
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} - minutes{offset_minutes};
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const auto day_point = floor<days>(ts);
  const year_month_day ymd{day_point};
  const hh_mm_ss<seconds> tod{ts - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), int(tod.hours().count()),
                int(tod.minutes().count()), int(tod.seconds().count()));
  return buf;
}

std::string_view to_string(Label label) { return label == Label::Age ? "age" : "no_age"; }

Label parse_label(std::string_view text) {
  if (text == "age") return Label::Age;
  if (text == "no_age") return Label::NoAge;
  throw ValidationError("unknown label '" + std::string(text) + "' (expected age or no_age)");
}

PostFormat parse_post_format(std::string_view name) {
  if (name == "jsonl") return PostFormat::Jsonl;
  if (name == "tsv") return PostFormat::Tsv;
  throw ValidationError("unknown post format '" + std::string(name) + "'");
}

PostFormat guess_post_format(const std::filesystem::path& path) {
  return path.extension() == ".tsv" ? PostFormat::Tsv : PostFormat::Jsonl;
}

struct PostReader::Impl {
  std::ifstream file;
  std::istream* in = nullptr;
  PostFormat format;
  std::size_t line = 0;
  // TSV column positions, resolved from the header row.
  int col_id = -1, col_user = -1, col_time = -1, col_text = -1, col_rt = -1;
  std::size_t columns = 0;

  void read_header() {
    std::string header;
    if (!std::getline(*in, header)) return;
    ++line;
    const auto names = split_tabs(strip_cr(header));
    columns = names.size();
    for (std::size_t i = 0; i < names.size(); ++i) {
      const int idx = static_cast<int>(i);
      if (names[i] == "id") col_id = idx;
      else if (names[i] == "user_id") col_user = idx;
      else if (names[i] == "created_at") col_time = idx;
      else if (names[i] == "text") col_text = idx;
      else if (names[i] == "is_retweet") col_rt = idx;
    }
    for (const auto& [col, name] : {std::pair{col_id, "id"}, std::pair{col_user, "user_id"},
                                    std::pair{col_time, "created_at"},
                                    std::pair{col_text, "text"}}) {
      if (col < 0) throw ParseError(std::string("TSV header lacks column '") + name + "'", line);
    }
  }

  Post parse_tsv(std::string_view raw) {
    const auto fields = split_tabs(raw);
    if (fields.size() != columns) {
      throw ParseError("expected " + std::to_string(columns) + " TSV fields, found " +
                           std::to_string(fields.size()),
                       line);
    }
    Post post;
    post.id = tsv_unescape(fields[col_id], line);
    post.user_id = tsv_unescape(fields[col_user], line);
    try {
      post.created_at = parse_timestamp(fields[col_time]);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line);
    }
    post.text = tsv_unescape(fields[col_text], line);
    if (col_rt >= 0) post.is_retweet = parse_bool(fields[col_rt], line);
    return post;
  }

  Post parse_jsonl(std::string_view raw) {
    json record;
    try {
      record = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line);
    }
    if (!record.is_object()) throw ParseError("record is not a JSON object", line);
    Post post;
    post.id = json_string_field(record, "id", line);
    post.user_id = json_string_field(record, "user_id", line);
    try {
      post.created_at = parse_timestamp(json_string_field(record, "created_at", line));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line);
    }
    const auto text = record.find("text");
    if (text == record.end() || !text->is_string()) {
      throw ParseError("missing or non-string field 'text'", line);
    }
    post.text = text->get<std::string>();
    if (const auto rt = record.find("is_retweet"); rt != record.end() && !rt->is_null()) {
      if (!rt->is_boolean()) throw ParseError("field 'is_retweet' must be a boolean", line);
      post.is_retweet = rt->get<bool>();
    }
    return post;
  }
};

PostReader::PostReader(const std::filesystem::path& path, PostFormat format)
    : impl_(std::make_unique<Impl>()) {
  impl_->file.open(path, std::ios::binary);
  if (!impl_->file) throw IoError("cannot open '" + path.string() + "'");
  impl_->in = &impl_->file;
  impl_->format = format;
  if (format == PostFormat::Tsv) impl_->read_header();
}

PostReader::PostReader(std::istream& in, PostFormat format) : impl_(std::make_unique<Impl>()) {
  impl_->in = &in;
  impl_->format = format;
  if (format == PostFormat::Tsv) impl_->read_header();
}

PostReader::~PostReader() = default;
PostReader::PostReader(PostReader&&) noexcept = default;
PostReader& PostReader::operator=(PostReader&&) noexcept = default;

std::size_t PostReader::line() const { return impl_->line; }

bool PostReader::next(Post& out) {
  std::string raw;
  while (std::getline(*impl_->in, raw)) {
    ++impl_->line;
    const std::string_view view = strip_cr(raw);
    if (view.find_first_not_of(" \t") == std::string_view::npos) continue;
    out = impl_->format == PostFormat::Tsv ? impl_->parse_tsv(view) : impl_->parse_jsonl(view);
    if (out.id.empty()) throw ParseError("empty post id", impl_->line);
    return true;
  }
  if (impl_->in->bad()) throw IoError("read failure");
  return false;
}

namespace {

std::vector<Post> drain(PostReader& reader) {
  std::vector<Post> posts;
  std::unordered_set<std::string> seen;
  Post post;
  while (reader.next(post)) {
    if (!seen.insert(post.id).second) {
      throw ParseError("duplicate post id '" + post.id + "'", reader.line());
    }
    posts.push_back(std::move(post));
  }
  return posts;
}

}  // namespace

std::vector<Post> load_posts(const std::filesystem::path& path, PostFormat format) {
  PostReader reader(path, format);
  return drain(reader);
}

std::vector<Post> read_posts(std::istream& in, PostFormat format) {
  PostReader reader(in, format);
  return drain(reader);
}

void write_posts(std::ostream& out, std::span<const Post> posts, PostFormat format) {
  if (format == PostFormat::Tsv) {
    out << "id\tuser_id\tcreated_at\ttext\tis_retweet\n";
    for (const Post& p : posts) {
      out << tsv_escape(p.id) << '\t' << tsv_escape(p.user_id) << '\t'
          << format_timestamp(p.created_at) << '\t' << tsv_escape(p.text) << '\t'
          << (p.is_retweet ? "true" : "false") << '\n';
    }
    return;
  }
  for (const Post& p : posts) {
    json record = {{"id", p.id},
                   {"user_id", p.user_id},
                   {"created_at", format_timestamp(p.created_at)},
                   {"text", p.text},
                   {"is_retweet", p.is_retweet}};
    out << record.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  }
}

void save_posts(const std::filesystem::path& path, std::span<const Post> posts,
                PostFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  write_posts(out, posts, format);
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

void validate(const LabeledPost& item) {
  if (item.label == Label::Age) {
    if (!item.age) throw ValidationError("post '" + item.post.id + "': age label without age");
    if (*item.age < kMinAge || *item.age > kMaxAge) {
      throw ValidationError("post '" + item.post.id + "': age " + std::to_string(*item.age) +
                            " outside [10, 99]");
    }
  } else if (item.age) {
    throw ValidationError("post '" + item.post.id + "': no_age label carries an age");
  }
}

std::vector<LabeledPost> read_labels(std::istream& in, std::span<const Post> corpus) {
  std::unordered_map<std::string_view, const Post*> by_id;
  by_id.reserve(corpus.size());
  for (const Post& p : corpus) by_id.emplace(p.id, &p);

  std::vector<LabeledPost> out;
  std::unordered_set<std::string> seen;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view view = strip_cr(raw);
    if (view.empty()) continue;
    if (line == 1 && view.starts_with("post_id")) continue;
    const auto fields = split_tabs(view);
    if (fields.size() < 2 || fields.size() > 3) {
      throw ParseError("expected post_id, label, age", line);
    }
    const auto post = by_id.find(fields[0]);
    if (post == by_id.end()) {
      throw ParseError("unknown post id '" + std::string(fields[0]) + "'", line);
    }
    if (!seen.insert(std::string(fields[0])).second) {
      throw ParseError("duplicate label for post '" + std::string(fields[0]) + "'", line);
    }
    LabeledPost item;
    item.post = *post->second;
    try {
      item.label = parse_label(fields[1]);
      if (fields.size() == 3 && !fields[2].empty()) {
        int age = 0;
        const auto [ptr, ec] =
            std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), age);
        if (ec != std::errc{} || ptr != fields[2].data() + fields[2].size()) {
          throw ValidationError("age '" + std::string(fields[2]) + "' is not an integer");
        }
        item.age = age;
      }
      validate(item);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line) + ": " + e.what());
    }
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<LabeledPost> load_labels(const std::filesystem::path& path,
                                     std::span<const Post> corpus) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_labels(in, corpus);
}

void write_labels(std::ostream& out, std::span<const LabeledPost> data) {
  out << "post_id\tlabel\tage\n";
  for (const LabeledPost& item : data) {
    out << item.post.id << '\t' << to_string(item.label) << '\t';
    if (item.age) out << *item.age;
    out << '\n';
  }
}

SplitResult stratified_split(std::span<const LabeledPost> data, double train_fraction,
                             std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train fraction must lie strictly between 0 and 1");
  }
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[data[i].label == Label::Age ? 1 : 0].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty()) {
    throw ValidationError("stratified split needs both classes to be non-empty");
  }

  std::mt19937_64 rng(seed);
  std::vector<bool> in_train(data.size(), false);
  // Age first, then NoAge, so the draw sequence is fixed for a given seed.
  for (auto* indices : {&by_class[1], &by_class[0]}) {
    deterministic_shuffle(std::span<std::size_t>(*indices), rng);
    // The epsilon keeps products such as 0.29 * 100 from flooring to 28.
    const auto take = static_cast<std::size_t>(
        std::floor(static_cast<double>(indices->size()) * train_fraction + 1e-9));
    for (std::size_t k = 0; k < take; ++k) in_train[(*indices)[k]] = true;
  }

  SplitResult result;
  result.seed = seed;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (in_train[i] ? result.train : result.test).push_back(data[i]);
  }
  return result;
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t folds,
                                                    std::uint64_t seed) {
  if (folds < 2 || folds > n) throw ValidationError("fold count must lie in [2, n]");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  deterministic_shuffle(std::span<std::size_t>(order), rng);
  std::vector<std::vector<std::size_t>> out(folds);
  for (std::size_t i = 0; i < n; ++i) out[i % folds].push_back(order[i]);
  for (auto& fold : out) std::sort(fold.begin(), fold.end());
  return out;
}

}  // namespace selfage
