#include "lnk/corpus.hpp"

namespace lnk {

namespace {

std::vector<CorpusEntry> build() {
  std::vector<CorpusEntry> c;
  c.push_back({"fig2_tau_ex",
               "protocol tau_ex {\n"
               "  var product, address;\n"
               "  node parceltype(product);\n"
               "  node deliveryprice(parceltype, address);\n"
               "}\n",
               4, 3});
  c.push_back({"fig1_private_vars",
               "protocol private_vars {\n"
               "  var a1, a2, b1, b2, c1, c2;\n"
               "  node f1(a1, a2, b1);\n"
               "  node f2(b1, b2, c1);\n"
               "  node f3(c1, c2, a1);\n"
               "  node g(f1, f2, f3);\n"
               "}\n",
               10, 12});
  c.push_back({"fig3_nosync",
               "protocol nosync {\n"
               "  var x, y, u, v;\n"
               "  node f1(x, y);\n"
               "  node f2(u, v);\n"
               "  node g(f1, f2);\n"
               "}\n",
               7, 6});
  c.push_back({"fig4_sync",
               "protocol sync {\n"
               "  var w, x, y, z;\n"
               "  node t_init(x, y);\n"
               "  node f1(w, t_init);\n"
               "  node f2(t_init, z);\n"
               "  node g(f1, f2);\n"
               "}\n",
               8, 8});
  c.push_back({"fig9_tau_sec",
               "protocol tau_sec {\n"
               "  var x, y, u, v;\n"
               "  node f1(x, y);\n"
               "  node f2(u, v);\n"
               "  node f3(f1);\n"
               "  node g(f3, f1, f2);\n"
               "}\n",
               8, 8});
  c.push_back({"fig10_tau_insec",
               "protocol tau_insec {\n"
               "  var x, y, u, v;\n"
               "  node f1(x, y);\n"
               "  node f1p(x, y);\n"
               "  node f2(u, v);\n"
               "  node f3(f1);\n"
               "  node g(f3, f1p, f2);\n"
               "}\n",
               9, 10});
  return c;
}

}  // namespace

const std::vector<CorpusEntry>& corpus() {
  static const std::vector<CorpusEntry> c = build();
  return c;
}

const CorpusEntry& corpus_entry(const std::string& name) {
  for (const auto& e : corpus())
    if (e.name == name) return e;
  throw OpError("unknown corpus entry: " + name);
}

Protocol corpus_protocol(const std::string& name) {
  return parse_protocol(corpus_entry(name).text);
}

}  // namespace lnk
