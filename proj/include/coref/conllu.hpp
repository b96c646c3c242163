#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coref/common.hpp"

// CoNLL-U documents with CorefUD-style coreference annotations.
//
// Supported subset: comment lines, 10-column token lines, blank line after
// each sentence, empty nodes with `n.m` ids. Only ID, FORM and the MISC
// `Entity` attribute are interpreted; every other column and MISC item is
// carried verbatim so that serialize(parse(x)) == x byte for byte.
// Multiword-token range lines (`n-m`) are outside the interpreted subset
// but are preserved as opaque text attached to the following word line.

namespace coref {

struct TokenId {
  int word = 0;       // 0 only for empty nodes anchored before the first word
  int empty_sub = 0;  // > 0 iff this is an empty node (rendered `word.empty_sub`)

  bool is_empty_node() const { return empty_sub > 0; }
  friend auto operator<=>(const TokenId&, const TokenId&) = default;

  std::string str() const {
    if (empty_sub > 0) return cat(word, '.', empty_sub);
    return std::to_string(word);
  }
};

struct Token {
  TokenId id;
  std::string form;
  std::array<std::string, 7> opaque;  // LEMMA..DEPS, verbatim
  std::vector<std::string> misc;      // MISC items in order; empty means `_`
  std::string mwt_line;               // raw `n-m` line preceding this token, if any

  // Index of the `Entity=` item in misc, or npos.
  size_t entity_item() const {
    for (size_t i = 0; i < misc.size(); ++i)
      if (misc[i].rfind("Entity=", 0) == 0) return i;
    return std::string::npos;
  }
  std::string entity_value() const {
    size_t i = entity_item();
    return i == std::string::npos ? std::string() : misc[i].substr(7);
  }
};

struct Sentence {
  std::string sent_id;
  std::vector<std::string> comments;  // raw comment lines, verbatim
  std::vector<Token> tokens;
};

struct Document {
  std::string doc_id;
  std::vector<std::string> header_comments;  // `# newdoc ...` block
  std::vector<Sentence> sentences;
};

enum class MentionKind { overt, zero };

// Document-level coordinates of a mention span. Zero mentions occupy a
// single empty node (start == end).
struct MentionPos {
  int sentence = 0;
  TokenId start;
  TokenId end;
  friend auto operator<=>(const MentionPos&, const MentionPos&) = default;

  std::string str() const { return cat("s", sentence, ":", start.str(), "-", end.str()); }
};

struct Mention {
  std::string entity_id;
  MentionKind kind = MentionKind::overt;
  MentionPos pos;
};

// ---------------------------------------------------------------------------
// Entity attribute micro-grammar.
//
// The value is a concatenation of bracket items with no separator:
//   (<eid>[fields]   open
//   <eid>)           close
//   (<eid>[fields])  single token
// where <eid> is [A-Za-z0-9_]+, optionally followed by a discontinuity part
// suffix `[i/n]`, and `fields` is opaque `-`-separated text allowed on open
// and single items only.

enum class BracketKind { open, close, single };

struct EntityItem {
  BracketKind kind = BracketKind::open;
  std::string eid;
  std::string part;  // raw `[i/n]` suffix, empty if absent
};

namespace detail {

inline size_t scan_eid(std::string_view v, size_t i, std::string* out) {
  size_t start = i;
  while (i < v.size() &&
         (std::isalnum(static_cast<unsigned char>(v[i])) || v[i] == '_'))
    ++i;
  *out = std::string(v.substr(start, i - start));
  return i;
}

inline size_t scan_part(std::string_view v, size_t i, std::string* out) {
  if (i < v.size() && v[i] == '[') {
    size_t close = v.find(']', i);
    if (close != std::string_view::npos) {
      *out = std::string(v.substr(i, close - i + 1));
      return close + 1;
    }
  }
  return i;
}

}  // namespace detail

inline std::vector<EntityItem> parse_entity_value(std::string_view value) {
  std::vector<EntityItem> items;
  size_t i = 0;
  while (i < value.size()) {
    EntityItem item;
    if (value[i] == '(') {
      ++i;
      i = detail::scan_eid(value, i, &item.eid);
      if (item.eid.empty())
        throw Error(cat("unreadable Entity attribute \"", value, "\": empty entity id"));
      i = detail::scan_part(value, i, &item.part);
      // opaque fields run to the next bracket
      while (i < value.size() && value[i] != '(' && value[i] != ')') ++i;
      if (i < value.size() && value[i] == ')') {
        item.kind = BracketKind::single;
        ++i;
      } else {
        item.kind = BracketKind::open;
      }
    } else {
      i = detail::scan_eid(value, i, &item.eid);
      if (item.eid.empty())
        throw Error(cat("unreadable Entity attribute \"", value, "\": expected '(' or entity id"));
      i = detail::scan_part(value, i, &item.part);
      if (i >= value.size() || value[i] != ')')
        throw Error(cat("unreadable Entity attribute \"", value, "\": unterminated close bracket for \"",
                        item.eid, "\""));
      ++i;
      item.kind = BracketKind::close;
    }
    items.push_back(std::move(item));
  }
  return items;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline bool parse_int(std::string_view s, int* out) {
  if (s.empty() || s.size() > 9) return false;
  int v = 0;
  for (char c : s) {
    if (!is_ascii_digit(c)) return false;
    v = v * 10 + (c - '0');
  }
  *out = v;
  return true;
}

inline bool is_newdoc_comment(std::string_view line) {
  return line == "# newdoc" || line.rfind("# newdoc ", 0) == 0;
}

inline bool is_sent_id_comment(std::string_view line) {
  return line.rfind("# sent_id", 0) == 0;
}

// Value of a `# key = value` comment.
inline std::string comment_value(std::string_view line) {
  size_t eq = line.find('=');
  if (eq == std::string_view::npos) return std::string();
  size_t start = eq + 1;
  while (start < line.size() && line[start] == ' ') ++start;
  return std::string(line.substr(start));
}

struct Block {
  std::vector<std::string> comments;
  std::vector<Token> tokens;
  long first_line = 0;
};

}  // namespace detail

inline std::vector<Document> parse_documents(std::string_view text) {
  std::vector<Document> docs;
  detail::Block block;
  std::string pending_mwt;
  long line_no = 0;

  auto flush_block = [&] {
    if (!pending_mwt.empty())
      throw Error(cat("line ", line_no, ": multiword token line not followed by a word line"));
    if (block.comments.empty() && block.tokens.empty()) return;

    bool newdoc = false;
    for (const auto& c : block.comments)
      if (detail::is_newdoc_comment(c)) { newdoc = true; break; }

    if (newdoc) {
      Document doc;
      size_t split_at = block.comments.size();
      for (size_t i = 0; i < block.comments.size(); ++i) {
        if (detail::is_sent_id_comment(block.comments[i])) { split_at = i; break; }
      }
      doc.header_comments.assign(block.comments.begin(), block.comments.begin() + split_at);
      for (const auto& c : doc.header_comments)
        if (detail::is_newdoc_comment(c)) doc.doc_id = detail::comment_value(c);
      std::vector<std::string> rest(block.comments.begin() + split_at, block.comments.end());
      if (!rest.empty() || !block.tokens.empty()) {
        Sentence s;
        s.comments = std::move(rest);
        s.tokens = std::move(block.tokens);
        for (const auto& c : s.comments)
          if (detail::is_sent_id_comment(c)) s.sent_id = detail::comment_value(c);
        doc.sentences.push_back(std::move(s));
      }
      docs.push_back(std::move(doc));
    } else {
      if (docs.empty()) docs.emplace_back();  // content before any `# newdoc`
      Sentence s;
      s.comments = std::move(block.comments);
      s.tokens = std::move(block.tokens);
      for (const auto& c : s.comments)
        if (detail::is_sent_id_comment(c)) s.sent_id = detail::comment_value(c);
      docs.back().sentences.push_back(std::move(s));
    }
    block = detail::Block{};
  };

  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    bool at_end = nl >= text.size();
    pos = nl + 1;
    ++line_no;

    if (line.empty()) {
      flush_block();
      if (at_end) break;
      continue;
    }
    if (line[0] == '#') {
      if (!block.tokens.empty())
        throw Error(cat("line ", line_no, ": comment after token lines within a sentence"));
      block.comments.emplace_back(line);
      if (at_end) break;
      continue;
    }

    auto cols = split(line, '\t');
    if (cols.size() != 10)
      throw Error(cat("line ", line_no, ": expected 10 tab-separated columns, got ", cols.size()));

    const std::string& idc = cols[0];
    size_t dash = idc.find('-');
    size_t dot = idc.find('.');
    if (dash != std::string::npos) {
      int a = 0, b = 0;
      if (!detail::parse_int(std::string_view(idc).substr(0, dash), &a) ||
          !detail::parse_int(std::string_view(idc).substr(dash + 1), &b))
        throw Error(cat("line ", line_no, ": malformed token id \"", idc, "\""));
      if (!pending_mwt.empty())
        throw Error(cat("line ", line_no, ": consecutive multiword token lines"));
      pending_mwt = std::string(line);
      if (at_end) break;
      continue;
    }

    Token tok;
    if (dot != std::string::npos) {
      if (!detail::parse_int(std::string_view(idc).substr(0, dot), &tok.id.word) ||
          !detail::parse_int(std::string_view(idc).substr(dot + 1), &tok.id.empty_sub) ||
          tok.id.empty_sub < 1)
        throw Error(cat("line ", line_no, ": malformed empty-node id \"", idc, "\""));
    } else {
      if (!detail::parse_int(idc, &tok.id.word) || tok.id.word < 1)
        throw Error(cat("line ", line_no, ": malformed token id \"", idc, "\""));
    }
    if (!block.tokens.empty() && !(block.tokens.back().id < tok.id))
      throw Error(cat("line ", line_no, ": non-monotonic token id \"", idc, "\""));

    tok.form = cols[1];
    for (int i = 0; i < 7; ++i) tok.opaque[static_cast<size_t>(i)] = cols[static_cast<size_t>(i) + 2];
    if (cols[9] != "_") tok.misc = split(cols[9], '|');
    tok.mwt_line = std::exchange(pending_mwt, std::string());

    // validate Entity syntax eagerly so errors carry a line number
    size_t ei = tok.entity_item();
    if (ei != std::string::npos) {
      try {
        parse_entity_value(std::string_view(tok.misc[ei]).substr(7));
      } catch (const Error& e) {
        throw Error(cat("line ", line_no, ": ", e.what()));
      }
    }
    block.tokens.push_back(std::move(tok));
    if (at_end) break;
  }
  flush_block();

  std::set<std::string> ids;
  for (const auto& d : docs)
    if (!d.doc_id.empty() && !ids.insert(d.doc_id).second)
      throw Error(cat("duplicate document id \"", d.doc_id, "\""));
  return docs;
}

// ---------------------------------------------------------------------------
// Serialization

inline void serialize_document(const Document& doc, std::string* out) {
  for (const auto& c : doc.header_comments) { *out += c; *out += '\n'; }
  for (const auto& s : doc.sentences) {
    for (const auto& c : s.comments) { *out += c; *out += '\n'; }
    for (const auto& t : s.tokens) {
      if (!t.mwt_line.empty()) { *out += t.mwt_line; *out += '\n'; }
      *out += t.id.str();
      *out += '\t';
      *out += t.form;
      for (const auto& col : t.opaque) { *out += '\t'; *out += col; }
      *out += '\t';
      if (t.misc.empty()) {
        *out += '_';
      } else {
        for (size_t i = 0; i < t.misc.size(); ++i) {
          if (i) *out += '|';
          *out += t.misc[i];
        }
      }
      *out += '\n';
    }
    *out += '\n';
  }
}

inline std::string serialize_document(const Document& doc) {
  std::string out;
  serialize_document(doc, &out);
  return out;
}

inline std::string serialize_documents(const std::vector<Document>& docs) {
  std::string out;
  for (const auto& d : docs) serialize_document(d, &out);
  return out;
}

// ---------------------------------------------------------------------------
// Mention extraction

namespace detail {

// Drops crossing mentions, keeping the earlier-starting (enclosing) span.
// `mentions` must be sorted by (sentence, start, end desc).
inline void drop_crossing(std::vector<Mention>* mentions, Diagnostics* diags) {
  std::vector<Mention> kept;
  std::vector<size_t> stack;  // indices into kept: open spans, current sentence
  int cur_sentence = -1;
  for (const auto& m : *mentions) {
    if (m.pos.sentence != cur_sentence) {
      stack.clear();
      cur_sentence = m.pos.sentence;
    }
    while (!stack.empty() && kept[stack.back()].pos.end < m.pos.start) stack.pop_back();
    if (!stack.empty() && kept[stack.back()].pos.end < m.pos.end) {
      const Mention& outer = kept[stack.back()];
      if (diags)
        diags->push_back(cat("dropped crossing mention ", m.entity_id, " at ", m.pos.str(),
                             " (crosses ", outer.entity_id, " at ", outer.pos.str(), ")"));
      continue;
    }
    kept.push_back(m);
    stack.push_back(kept.size() - 1);
  }
  *mentions = std::move(kept);
}

}  // namespace detail

// Every open bracket is matched to a close with the same entity id (stack
// discipline per id). Returns mentions sorted by (sentence, start, end desc)
// so enclosing spans precede enclosed ones. Crossing and discontinuous
// mentions are reduced per the grammar subset, with diagnostics.
inline std::vector<Mention> extract_mentions(const Document& doc, Diagnostics* diags = nullptr) {
  std::vector<Mention> mentions;
  for (size_t si = 0; si < doc.sentences.size(); ++si) {
    const Sentence& sent = doc.sentences[si];
    std::map<std::string, std::vector<TokenId>> open;  // eid+part -> open positions
    for (const auto& tok : sent.tokens) {
      std::string value = tok.entity_value();
      if (value.empty()) continue;
      for (const auto& item : parse_entity_value(value)) {
        std::string key = item.eid + item.part;
        switch (item.kind) {
          case BracketKind::open:
            open[key].push_back(tok.id);
            break;
          case BracketKind::single:
            mentions.push_back({item.eid + item.part, MentionKind::overt,
                                {static_cast<int>(si), tok.id, tok.id}});
            break;
          case BracketKind::close: {
            auto it = open.find(key);
            if (it == open.end() || it->second.empty())
              throw Error(cat("entity bracket for \"", key, "\" closed before open at sentence ",
                              sent.sent_id.empty() ? std::to_string(si) : sent.sent_id,
                              " token ", tok.id.str()));
            TokenId start = it->second.back();
            it->second.pop_back();
            mentions.push_back({item.eid + item.part, MentionKind::overt,
                                {static_cast<int>(si), start, tok.id}});
            break;
          }
        }
      }
    }
    std::vector<std::string> unmatched;
    for (const auto& [key, stack] : open)
      if (!stack.empty()) unmatched.push_back(key);
    if (!unmatched.empty()) {
      std::string ids;
      for (const auto& k : unmatched) { if (!ids.empty()) ids += ", "; ids += k; }
      throw Error(cat("unbalanced entity brackets, never closed: ", ids));
    }
  }

  // discontinuous mentions: keep part [1/n], drop the rest
  std::vector<Mention> filtered;
  for (auto& m : mentions) {
    size_t br = m.entity_id.find('[');
    if (br == std::string::npos) {
      filtered.push_back(std::move(m));
      continue;
    }
    std::string eid = m.entity_id.substr(0, br);
    std::string part = m.entity_id.substr(br);
    if (part.rfind("[1/", 0) == 0) {
      if (diags)
        diags->push_back(cat("discontinuous mention ", eid, part, " at ", m.pos.str(),
                             " reduced to its first span"));
      m.entity_id = eid;
      filtered.push_back(std::move(m));
    } else if (diags) {
      diags->push_back(cat("dropped continuation span ", eid, part, " at ", m.pos.str()));
    }
  }
  mentions = std::move(filtered);

  // classify kinds; spans anchored on an empty node must be single-node zeros
  std::vector<Mention> classified;
  for (auto& m : mentions) {
    if (m.pos.start == m.pos.end && m.pos.start.is_empty_node()) {
      m.kind = MentionKind::zero;
      classified.push_back(std::move(m));
    } else if (m.pos.start.is_empty_node() || m.pos.end.is_empty_node()) {
      if (diags)
        diags->push_back(cat("dropped mention ", m.entity_id, " at ", m.pos.str(),
                             ": multi-token span anchored on an empty node"));
    } else {
      m.kind = MentionKind::overt;
      classified.push_back(std::move(m));
    }
  }
  mentions = std::move(classified);

  std::sort(mentions.begin(), mentions.end(), [](const Mention& a, const Mention& b) {
    if (a.pos.sentence != b.pos.sentence) return a.pos.sentence < b.pos.sentence;
    if (a.pos.start != b.pos.start) return a.pos.start < b.pos.start;
    return b.pos.end < a.pos.end;
  });

  std::set<std::pair<int, std::pair<TokenId, TokenId>>> seen;
  for (const auto& m : mentions) {
    auto key = std::make_pair(m.pos.sentence, std::make_pair(m.pos.start, m.pos.end));
    if (!seen.insert(key).second)
      throw Error(cat("duplicate mention span at ", m.pos.str()));
  }

  detail::drop_crossing(&mentions, diags);
  return mentions;
}

// ---------------------------------------------------------------------------
// Entity writing

// Replaces all Entity attributes of `doc` with brackets encoding `mentions`.
// Only the entity id is emitted (no head/type fields). Crossing pairs are an
// error; nesting follows stack discipline with the longer span opening first.
inline Document write_entities(const Document& doc, const std::vector<Mention>& mentions) {
  Document out = doc;
  for (auto& s : out.sentences)
    for (auto& t : s.tokens) {
      size_t i = t.entity_item();
      if (i != std::string::npos) t.misc.erase(t.misc.begin() + static_cast<long>(i));
    }

  std::vector<std::vector<Mention>> by_sentence(out.sentences.size());
  std::set<std::pair<int, std::pair<TokenId, TokenId>>> seen;
  for (const auto& m : mentions) {
    if (m.entity_id.empty()) throw Error(cat("mention at ", m.pos.str(), " has an empty entity id"));
    if (m.pos.sentence < 0 || m.pos.sentence >= static_cast<int>(out.sentences.size()))
      throw Error(cat("mention sentence out of range at ", m.pos.str()));
    if (m.pos.end < m.pos.start) throw Error(cat("mention span reversed at ", m.pos.str()));
    if (!seen.insert({m.pos.sentence, {m.pos.start, m.pos.end}}).second)
      throw Error(cat("duplicate mention span at ", m.pos.str()));
    by_sentence[static_cast<size_t>(m.pos.sentence)].push_back(m);
  }

  for (size_t si = 0; si < out.sentences.size(); ++si) {
    auto& ms = by_sentence[si];
    if (ms.empty()) continue;
    Sentence& sent = out.sentences[si];

    std::map<TokenId, size_t> token_index;
    for (size_t ti = 0; ti < sent.tokens.size(); ++ti) token_index[sent.tokens[ti].id] = ti;
    for (const auto& m : ms) {
      if (!token_index.count(m.pos.start) || !token_index.count(m.pos.end))
        throw Error(cat("mention span outside sentence at ", m.pos.str()));
    }

    std::sort(ms.begin(), ms.end(), [](const Mention& a, const Mention& b) {
      if (a.pos.start != b.pos.start) return a.pos.start < b.pos.start;
      return b.pos.end < a.pos.end;
    });

    std::map<TokenId, std::string> values;
    std::vector<const Mention*> stack;
    size_t next = 0;
    for (const auto& tok : sent.tokens) {
      // opens (longer span first), then singles, then closes innermost-first
      while (next < ms.size() && ms[next].pos.start == tok.id) {
        const Mention& m = ms[next];
        if (m.pos.end == m.pos.start) {
          values[tok.id] += cat('(', m.entity_id, ')');
        } else {
          if (!stack.empty() && stack.back()->pos.end < m.pos.end)
            throw Error(cat("crossing mentions: ", stack.back()->entity_id, " at ",
                            stack.back()->pos.str(), " and ", m.entity_id, " at ", m.pos.str()));
          values[tok.id] += cat('(', m.entity_id);
          stack.push_back(&m);
        }
        ++next;
      }
      while (!stack.empty() && stack.back()->pos.end == tok.id) {
        values[tok.id] += cat(stack.back()->entity_id, ')');
        stack.pop_back();
      }
      if (!stack.empty() && stack.back()->pos.end < tok.id)
        throw Error(cat("crossing mentions: ", stack.back()->entity_id, " at ",
                        stack.back()->pos.str(), " not closed in span order"));
    }

    for (auto& tok : sent.tokens) {
      auto it = values.find(tok.id);
      if (it != values.end()) tok.misc.push_back("Entity=" + it->second);
    }
  }
  return out;
}

}  // namespace coref
