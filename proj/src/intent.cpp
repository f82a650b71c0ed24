#include "keyhole/intent.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

namespace keyhole::intent {

std::string_view to_string(Verb verb) {
  switch (verb) {
    case Verb::Show: return "show";
    case Verb::Filter: return "filter";
    case Verb::Breakdown: return "breakdown";
    case Verb::Compare: return "compare";
    case Verb::Zoom: return "zoom";
    case Verb::Remove: return "remove";
    case Verb::Summarize: return "summarize";
    case Verb::Analyze: return "analyze";
    case Verb::Characterize: return "characterize";
  }
  return "unknown";
}

std::optional<Verb> parse_verb(std::string_view text) {
  for (Verb v : {Verb::Show, Verb::Filter, Verb::Breakdown, Verb::Compare, Verb::Zoom, Verb::Remove,
                 Verb::Summarize, Verb::Analyze, Verb::Characterize})
    if (to_string(v) == text) return v;
  return std::nullopt;
}

std::string_view to_string(DeicticWord word) {
  switch (word) {
    case DeicticWord::This: return "this";
    case DeicticWord::These: return "these";
    case DeicticWord::That: return "that";
  }
  return "this";
}

std::string_view to_string(Tier tier) {
  switch (tier) {
    case Tier::Silent: return "silent";
    case Tier::Inferred: return "inferred";
    case Tier::NeedsConfirmation: return "needs_confirmation";
  }
  return "unknown";
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1])
        d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
    }
  }
  return d[n][m];
}

namespace {

struct Token {
  std::string text;
  bool quoted = false;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::optional<std::vector<Token>> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back({std::move(word), false});
    word.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (is_space(c)) {
      flush();
    } else if (c == '"') {
      flush();
      std::string quoted;
      bool closed = false;
      for (++i; i < text.size(); ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) {
          quoted.push_back(text[++i]);
        } else if (text[i] == '"') {
          closed = true;
          break;
        } else {
          quoted.push_back(text[i]);
        }
      }
      if (!closed) return std::nullopt;
      out.push_back({std::move(quoted), true});
    } else if (c == '!' && i + 1 < text.size() && text[i + 1] == '=') {
      flush();
      out.push_back({"!=", false});
      ++i;
    } else if (c == '=' || c == ',' || c == '?') {
      flush();
      out.push_back({std::string(1, c), false});
    } else {
      word.push_back(c);
    }
  }
  flush();
  return out;
}

bool is_keyword(const Token& t, std::string_view kw) { return !t.quoted && lower(t.text) == kw; }

std::optional<DeicticWord> deictic(const Token& t) {
  if (t.quoted) return std::nullopt;
  std::string l = lower(t.text);
  if (l == "this") return DeicticWord::This;
  if (l == "these") return DeicticWord::These;
  if (l == "that") return DeicticWord::That;
  return std::nullopt;
}

bool is_punct(const Token& t) {
  return !t.quoted && (t.text == "=" || t.text == "!=" || t.text == "," || t.text == "?");
}

struct ColumnMatch {
  std::string name;
  double confidence = 0;
};

std::vector<ColumnMatch> match_column(const Token& tok, std::span<const std::string> schema) {
  for (const auto& col : schema)
    if (col == tok.text) return {{col, 1.0}};
  std::vector<ColumnMatch> all;
  for (const auto& col : schema) {
    if (col.empty()) continue;
    double dist = static_cast<double>(edit_distance(tok.text, col));
    all.push_back({col, 1.0 / (1.0 + dist / static_cast<double>(col.size()))});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const ColumnMatch& a, const ColumnMatch& b) { return a.confidence > b.confidence; });
  if (all.empty()) return all;
  const double best = all.front().confidence;
  std::erase_if(all, [&](const ColumnMatch& m) { return m.confidence < best - kNearTie; });
  return all;
}

[[noreturn]] void fail(const std::string& why) { throw UnparseableError(why, {}); }

// A command skeleton whose column positions are still open.
struct Draft {
  Verb verb = Verb::Summarize;
  Args args;
  std::vector<DeicticSlot> slots;
  std::vector<std::vector<ColumnMatch>> columns;
  std::function<void(Args&, std::size_t, const std::string&)> assign;
};

IntentCommand finish(Draft draft) {
  for (const auto& c : draft.columns)
    if (c.empty()) fail("no columns to match against");

  auto build = [&](const std::vector<std::size_t>& pick) {
    IntentCommand cmd;
    cmd.verb = draft.verb;
    cmd.args = draft.args;
    cmd.deictic_slots = draft.slots;
    cmd.confidence = 1.0;
    for (std::size_t i = 0; i < draft.columns.size(); ++i) {
      const auto& m = draft.columns[i][pick[i]];
      draft.assign(cmd.args, i, m.name);
      cmd.confidence = std::min(cmd.confidence, m.confidence);
    }
    return cmd;
  };

  std::vector<std::size_t> best(draft.columns.size(), 0);
  IntentCommand primary = build(best);
  std::vector<IntentCommand> alternatives;
  for (std::size_t i = 0; i < draft.columns.size(); ++i) {
    for (std::size_t j = 1; j < draft.columns[i].size(); ++j) {
      auto pick = best;
      pick[i] = j;
      alternatives.push_back(build(pick));
    }
  }
  std::stable_sort(alternatives.begin(), alternatives.end(),
                   [](const IntentCommand& a, const IntentCommand& b) { return a.confidence > b.confidence; });

  if (primary.confidence < kMinParseConfidence) {
    std::vector<IntentCommand> offered{primary};
    offered.insert(offered.end(), alternatives.begin(), alternatives.end());
    throw UnparseableError("no column is a close enough match (best confidence " +
                               std::to_string(primary.confidence) + ")",
                           std::move(offered));
  }
  primary.alternatives = std::move(alternatives);
  return primary;
}

class Parser {
 public:
  Parser(std::vector<Token> tokens, std::span<const std::string> schema)
      : tokens_(std::move(tokens)), schema_(schema) {}

  IntentCommand run() {
    if (tokens_.empty()) fail("empty utterance");
    const Token& head = next();
    if (is_keyword(head, "filter")) return filter();
    if (is_keyword(head, "show")) return show();
    if (is_keyword(head, "break")) return breakdown();
    if (is_keyword(head, "compare")) return compare();
    if (is_keyword(head, "zoom")) return zoom();
    if (is_keyword(head, "remove")) return remove();
    if (is_keyword(head, "summarize")) return summarize();
    if (is_keyword(head, "analyze")) return analyze();
    if (is_keyword(head, "what")) return characterize();
    fail("unknown command '" + head.text + "'");
  }

 private:
  bool at_end() const { return pos_ >= tokens_.size(); }
  const Token& peek() const { return tokens_[pos_]; }
  const Token& next() {
    if (at_end()) fail("utterance ended early");
    return tokens_[pos_++];
  }
  void expect(std::string_view kw) {
    const Token& t = next();
    if (!is_keyword(t, kw)) fail("expected '" + std::string(kw) + "', found '" + t.text + "'");
  }
  void expect_end() {
    if (!at_end()) fail("unexpected '" + peek().text + "'");
  }
  const Token& column_token() {
    const Token& t = next();
    if (is_punct(t)) fail("expected a column, found '" + t.text + "'");
    return t;
  }

  // One literal: a single quoted token or a run of bare words.
  std::string literal(bool stop_at_and) {
    if (at_end()) fail("missing literal");
    if (peek().quoted) return next().text;
    std::string out;
    while (!at_end()) {
      const Token& t = peek();
      if (t.text == ",") break;
      if (stop_at_and && is_keyword(t, "and")) break;
      if (t.quoted || is_punct(t)) fail("malformed literal near '" + t.text + "'");
      if (!out.empty()) out += ' ';
      out += next().text;
    }
    if (out.empty()) fail("missing literal");
    return out;
  }

  static void assign_column(Args& a, std::size_t, const std::string& name) { a.column = name; }

  IntentCommand filter() {
    Draft d;
    d.verb = Verb::Filter;
    d.columns.push_back(match_column(column_token(), schema_));
    d.assign = assign_column;
    const Token& op = next();
    if (op.text == "=" && !op.quoted) {
      d.args.op = data::FilterOp::Eq;
    } else if (op.text == "!=" && !op.quoted) {
      d.args.op = data::FilterOp::Neq;
    } else if (is_keyword(op, "in")) {
      d.args.op = data::FilterOp::In;
    } else if (is_keyword(op, "between")) {
      d.args.op = data::FilterOp::Range;
      d.args.literals.push_back(literal(true));
      expect("and");
      d.args.literals.push_back(literal(false));
      expect_end();
      return finish(std::move(d));
    } else {
      fail("unknown filter operator '" + op.text + "'");
    }
    d.args.literals.push_back(literal(false));
    while (!at_end()) {
      const Token& t = next();
      if (t.text != "," || t.quoted) fail("expected ',' between literals");
      d.args.literals.push_back(literal(false));
    }
    if (d.args.literals.size() > 1) {
      if (d.args.op == data::FilterOp::Neq) fail("'!=' takes a single literal");
      d.args.op = data::FilterOp::In;
    }
    return finish(std::move(d));
  }

  IntentCommand show() {
    Draft d;
    d.verb = Verb::Show;
    std::vector<Token> measure;
    while (!at_end() && !is_keyword(peek(), "by")) measure.push_back(next());
    expect("by");
    const Token& dim = column_token();
    expect_end();
    if (measure.empty() || measure.size() > 2) fail("expected a measure before 'by'");
    for (const auto& t : measure)
      if (is_punct(t)) fail("malformed measure");

    std::optional<data::Aggregate> agg;
    if (!measure.front().quoted) agg = data::parse_aggregate(lower(measure.front().text));
    if (measure.size() == 2 && !agg) fail("unknown aggregate '" + measure.front().text + "'");
    if (measure.size() == 1 && agg) {
      if (*agg != data::Aggregate::Count) fail("aggregate needs a column");
      d.args.aggregate = *agg;
    } else {
      d.args.aggregate = agg.value_or(data::Aggregate::Sum);
      d.columns.push_back(match_column(measure.back(), schema_));
    }
    d.columns.push_back(match_column(dim, schema_));
    const bool has_measure = d.columns.size() == 2;
    d.assign = [has_measure](Args& a, std::size_t i, const std::string& name) {
      if (has_measure && i == 0)
        a.measure = name;
      else
        a.column = name;
    };
    return finish(std::move(d));
  }

  IntentCommand breakdown() {
    Draft d;
    d.verb = Verb::Breakdown;
    if (!at_end())
      if (auto w = deictic(peek())) d.slots.push_back({*w, pos_++});
    expect("down");
    expect("by");
    d.columns.push_back(match_column(column_token(), schema_));
    expect_end();
    d.assign = assign_column;
    return finish(std::move(d));
  }

  std::string ref(Draft& d) {
    const Token& t = next();
    if (is_punct(t)) fail("expected a reference, found '" + t.text + "'");
    if (auto w = deictic(t)) d.slots.push_back({*w, pos_ - 1});
    return t.text;
  }

  IntentCommand compare() {
    Draft d;
    d.verb = Verb::Compare;
    d.args.left = ref(d);
    expect("vs");
    d.args.right = ref(d);
    expect_end();
    return finish(std::move(d));
  }

  IntentCommand zoom() {
    Draft d;
    d.verb = Verb::Zoom;
    const Token& t = next();
    if (is_keyword(t, "in"))
      d.args.zoom = ZoomDirection::In;
    else if (is_keyword(t, "out"))
      d.args.zoom = ZoomDirection::Out;
    else
      fail("zoom takes 'in' or 'out'");
    expect_end();
    return finish(std::move(d));
  }

  IntentCommand remove() {
    Draft d;
    d.verb = Verb::Remove;
    expect("filter");
    const Token& t = column_token();
    expect_end();
    bool digits = !t.quoted && !t.text.empty() && t.text.size() < 10 &&
                  std::all_of(t.text.begin(), t.text.end(),
                              [](unsigned char c) { return std::isdigit(c) != 0; });
    if (digits) {
      std::size_t n = std::stoul(t.text);
      if (n == 0) fail("filter positions start at 1");
      d.args.remove_index = n;
      return finish(std::move(d));
    }
    d.columns.push_back(match_column(t, schema_));
    d.assign = assign_column;
    return finish(std::move(d));
  }

  IntentCommand summarize() {
    Draft d;
    d.verb = Verb::Summarize;
    if (!at_end()) {
      auto w = deictic(peek());
      if (!w) fail("unexpected '" + peek().text + "'");
      d.slots.push_back({*w, pos_++});
    }
    expect_end();
    return finish(std::move(d));
  }

  IntentCommand analyze() {
    Draft d;
    d.verb = Verb::Analyze;
    std::string topic;
    while (!at_end()) {
      if (!topic.empty()) topic += ' ';
      topic += next().text;
    }
    if (topic.empty()) fail("analyze needs a topic");
    d.args.topic = std::move(topic);
    return finish(std::move(d));
  }

  IntentCommand characterize() {
    Draft d;
    d.verb = Verb::Characterize;
    expect("do");
    const Token& t = next();
    auto w = deictic(t);
    if (!w) fail("expected 'these', 'this' or 'that'");
    d.slots.push_back({*w, pos_ - 1});
    std::string noun;
    while (!at_end() && !is_keyword(peek(), "have")) {
      const Token& n = next();
      if (n.quoted || is_punct(n)) fail("malformed question");
      if (!noun.empty()) noun += ' ';
      noun += n.text;
    }
    expect("have");
    expect("in");
    expect("common");
    if (!at_end() && peek().text == "?" && !peek().quoted) ++pos_;
    expect_end();
    d.args.topic = std::move(noun);
    return finish(std::move(d));
  }

  std::vector<Token> tokens_;
  std::span<const std::string> schema_;
  std::size_t pos_ = 0;
};

// Words the parser treats as structure; names equal to one of these are
// quoted on output.
bool reserved(std::string_view s) {
  static const char* words[] = {"filter", "show", "break", "down", "by", "compare", "vs",
                                "zoom", "in", "out", "remove", "summarize", "analyze", "what",
                                "do", "have", "common", "this", "these", "that", "and",
                                "between", "count", "sum", "mean", "avg", "min", "max"};
  std::string l = lower(s);
  for (const char* w : words)
    if (l == w) return true;
  return false;
}

bool plain_word(std::string_view w) {
  if (w.empty()) return false;
  for (char c : w)
    if (is_space(c) || c == '"' || c == '\\' || c == '=' || c == ',' || c == '?' || c == '!')
      return false;
  return true;
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

// Single-token names (columns, refs).
std::string render_name(std::string_view s) {
  return plain_word(s) && !reserved(s) ? std::string(s) : quote(s);
}

// Literals may be several words separated by single spaces.
std::string render_literal(std::string_view s) {
  if (s.empty() || s.front() == ' ' || s.back() == ' ') return quote(s);
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(' ', start);
    if (end == std::string_view::npos) end = s.size();
    std::string_view w = s.substr(start, end - start);
    if (!plain_word(w) || lower(w) == "and") return quote(s);
    start = end + 1;
  }
  return std::string(s);
}

std::string slot_word(const IntentCommand& cmd, std::size_t index) {
  if (index < cmd.deictic_slots.size())
    return std::string(to_string(cmd.deictic_slots[index].word));
  return {};
}

}  // namespace

IntentCommand parse(std::string_view utterance, std::span<const std::string> schema) {
  auto tokens = tokenize(utterance);
  if (!tokens) fail("unterminated quote");
  return Parser(std::move(*tokens), schema).run();
}

IntentCommand parse(std::string_view utterance, std::span<const std::string> schema,
                    ExternalResolver* resolver) {
  try {
    return parse(utterance, schema);
  } catch (const UnparseableError&) {
    if (!resolver) throw;
    auto cmd = resolver->resolve(utterance, schema);
    if (!cmd) throw;
    if (!(cmd->confidence > 0 && cmd->confidence <= 1))
      throw Error(ErrorCode::Validation, "external resolver returned confidence outside (0,1]");
    return *cmd;
  }
}

IntentCommand resolve_deixis(const IntentCommand& cmd, std::span<const std::size_t> selection,
                             std::optional<std::string> anchor_card) {
  if (cmd.deictic_slots.empty())
    throw Error(ErrorCode::Validation, "command has no deictic reference to resolve");
  Binding b;
  if (!selection.empty()) {
    b.row_ids.assign(selection.begin(), selection.end());
    b.anchor_card = std::move(anchor_card);
  } else if (anchor_card) {
    b.anchor_card = std::move(anchor_card);
  } else {
    throw Error(ErrorCode::NeedsSelection,
                "'" + std::string(to_string(cmd.deictic_slots.front().word)) +
                    "' needs a selection or an anchor card");
  }
  IntentCommand out = cmd;
  out.deictic_slots.clear();
  out.binding = std::move(b);
  return out;
}

void validate(const TierBounds& bounds) {
  if (!(bounds.inferred > 0 && bounds.inferred < bounds.silent && bounds.silent <= 1))
    throw Error(ErrorCode::Validation, "tier bounds must satisfy 0 < inferred < silent <= 1");
}

Tier confidence_tier(double confidence, const TierBounds& bounds) {
  if (!(confidence > 0 && confidence <= 1))
    throw Error(ErrorCode::Validation, "confidence must be in (0, 1]");
  if (confidence >= bounds.silent) return Tier::Silent;
  if (confidence >= bounds.inferred) return Tier::Inferred;
  return Tier::NeedsConfirmation;
}

std::string format(const IntentCommand& cmd) {
  const Args& a = cmd.args;
  switch (cmd.verb) {
    case Verb::Filter: {
      std::string out = "filter " + render_name(a.column);
      if (a.op == data::FilterOp::Range && a.literals.size() == 2)
        return out + " between " + render_literal(a.literals[0]) + " and " +
               render_literal(a.literals[1]);
      switch (a.op) {
        case data::FilterOp::Eq: out += " = "; break;
        case data::FilterOp::Neq: out += " != "; break;
        default: out += " in "; break;
      }
      for (std::size_t i = 0; i < a.literals.size(); ++i) {
        if (i) out += ", ";
        out += render_literal(a.literals[i]);
      }
      return out;
    }
    case Verb::Show: {
      std::string out = "show " + std::string(data::to_string(a.aggregate));
      if (a.measure) out += " " + render_name(*a.measure);
      return out + " by " + render_name(a.column);
    }
    case Verb::Breakdown: {
      std::string w = slot_word(cmd, 0);
      return "break " + (w.empty() ? std::string() : w + " ") + "down by " + render_name(a.column);
    }
    case Verb::Compare:
      return "compare " + render_name(a.left) + " vs " + render_name(a.right);
    case Verb::Zoom:
      return a.zoom == ZoomDirection::In ? "zoom in" : "zoom out";
    case Verb::Remove:
      return "remove filter " +
             (a.remove_index ? std::to_string(*a.remove_index) : render_name(a.column));
    case Verb::Summarize: {
      std::string w = slot_word(cmd, 0);
      return w.empty() ? "summarize" : "summarize " + w;
    }
    case Verb::Analyze:
      return "analyze " + a.topic;
    case Verb::Characterize: {
      std::string w = slot_word(cmd, 0);
      if (w.empty()) w = "these";
      return "what do " + w + (a.topic.empty() ? std::string() : " " + a.topic) +
             " have in common";
    }
  }
  return {};
}

}  // namespace keyhole::intent
