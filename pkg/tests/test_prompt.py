import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcgkit.prompt import (
    BUILTIN_NAMES,
    CatalogError,
    PromptCatalog,
    PromptSet,
    assemble,
    builtin_defaults,
    load_catalog,
    save_catalog,
)


def test_assemble_worked_example():
    ps = PromptSet(
        ai_prefix="",
        retriever_prefix='"',
        retriever_suffix='"\nanswer the following question with the provided knowledge.\n',
        model_prefix="",
        model_suffix="\nAI:",
    )
    got = assemble(ps, "K", "Q")
    assert got == '"K"\nanswer the following question with the provided knowledge.\nQ\nAI:'


def test_assemble_all_empty_is_identity():
    assert assemble(PromptSet(), "", "Q") == "Q"


def test_assemble_emits_retriever_slots_even_without_knowledge():
    ps = PromptSet(retriever_prefix="[", retriever_suffix="]")
    assert assemble(ps, "", "Q") == "[]Q"


slot = st.text(alphabet=st.characters(categories=("L", "N", "P", "Zs"), include_characters="\n"), max_size=20)


@given(a=slot, b=slot, c=slot, d=slot, e=slot, f=slot, g=slot)
@settings(max_examples=100, deadline=None)
def test_assemble_seven_term_concatenation_law(a, b, c, d, e, f, g):
    ps = PromptSet(ai_prefix=a, retriever_prefix=b, retriever_suffix=d, model_prefix=e, model_suffix=g)
    assert assemble(ps, c, f) == a + b + c + d + e + f + g


def test_query_appears_exactly_once():
    ps = builtin_defaults()["rcg"]
    query = "zxqv-unique-query-marker"
    prompt = assemble(ps, "some knowledge.", query)
    assert prompt.count(query) == 1


# -- builtins ------------------------------------------------------------------


def test_builtin_names_present():
    catalog = builtin_defaults()
    for name in BUILTIN_NAMES:
        assert name in catalog


def test_builtin_rcg_suffix_text():
    assert (
        "answer the following question with the provided knowledge."
        in builtin_defaults()["rcg"].retriever_suffix
    )


def test_builtin_rag_suffix_text():
    assert (
        "answer the following question. You may use the provided knowledge."
        in builtin_defaults()["rag"].retriever_suffix
    )


def test_builtin_rog_is_retrieval_off_shape():
    rog = builtin_defaults()["rog"]
    assert rog.retriever_prefix == ""
    assert rog.retriever_suffix == ""
    assert rog.model_suffix == "\nAI:"


def test_reset_restores_defaults_after_edit():
    catalog = builtin_defaults()
    catalog.set("rcg", PromptSet(ai_prefix="edited"))
    assert catalog["rcg"].ai_prefix == "edited"
    catalog.reset_builtins()
    assert catalog["rcg"] == builtin_defaults()["rcg"]


# -- catalog files ----------------------------------------------------------------


def test_catalog_round_trip_byte_identical(tmp_path):
    path1 = tmp_path / "catalog1.json"
    path2 = tmp_path / "catalog2.json"
    catalog = builtin_defaults()
    catalog.set("custom", PromptSet(retriever_suffix="line one\nline two\n", model_suffix="\nBot:"))
    save_catalog(catalog, path1)
    loaded = load_catalog(path1)
    save_catalog(loaded, path2)
    assert path1.read_bytes() == path2.read_bytes()
    assert loaded["custom"].retriever_suffix == "line one\nline two\n"


def test_catalog_unknown_fields_rejected():
    with pytest.raises(CatalogError, match="unknown fields"):
        PromptCatalog.from_dict({"rcg": {"ai_prefix": "", "bogus_slot": "x"},
                                 "rag": {}, "rog": {}})


def test_catalog_missing_builtin_rejected():
    with pytest.raises(CatalogError, match="missing built-in"):
        PromptCatalog.from_dict({"rcg": {}, "rag": {}})


def test_catalog_non_string_slot_rejected():
    with pytest.raises(CatalogError, match="must be a string"):
        PromptCatalog.from_dict({"rcg": {"ai_prefix": 3}, "rag": {}, "rog": {}})


def test_malformed_catalog_reports_line_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "rcg": {\n', encoding="utf-8")
    with pytest.raises(CatalogError, match=r"line \d+"):
        load_catalog(path)
