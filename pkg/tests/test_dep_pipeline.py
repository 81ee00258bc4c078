"""Dependency pipeline tests: oracle ordering, candidate masks, losses
against exact closed forms, decode validity, beam behavior, and training."""

import numpy as np
import pytest

from ptrparse import autodiff as ad
from ptrparse.corpus import gen_synthetic_dep
from ptrparse.dep import (DepConfig, DepModel, _candidate_mask, build_dep_vocabs,
                          config_from_dict, config_to_dict, decode_beam,
                          decode_greedy, example_losses, forced_decode,
                          format_trace, oracle_order, replay_events,
                          run_transition, train_dep)
from ptrparse.errors import ConfigError, TreeError
from ptrparse.trees import DepTree, Token


def tiny_config(**kw):
    base = dict(word_dim=6, pos_dim=4, char_dim=4, char_filters=5, char_window=3,
                encoder_layers=1, encoder_hidden=8, decoder_layers=1, decoder_hidden=8,
                arc_mlp=8, label_mlp=6, embed_dropout=0.0, recurrent_dropout=0.0,
                layer_dropout=0.0, state_dropout=0.0, mlp_dropout=0.0,
                batch_size=4, epochs=3, seed=3)
    base.update(kw)
    return DepConfig(**base)


def tiny_model(items, **kw):
    config = tiny_config(**kw)
    vocabs = build_dep_vocabs(items)
    return DepModel(config, *vocabs, np.random.default_rng(config.seed)), config


def sentence(n):
    return [Token(f"w{i}", "NOUN") for i in range(n)]


def items_for(heads_list):
    items = []
    for heads in heads_list:
        labels = [f"dep{i % 3}" for i in range(len(heads))]
        items.append((sentence(len(heads)), DepTree(heads, labels)))
    return items


def test_oracle_order_frozen_examples():
    # Root -> 1, 1 -> 2 (left-ish ordering by nearest-first on each side).
    assert oracle_order(DepTree([0, 1, 1], ["a", "b", "c"])) == [
        (0, 1), (1, 2), (2, 2), (1, 3), (3, 3), (1, 1), (0, 0)]
    assert oracle_order(DepTree([2, 0], ["a", "b"])) == [
        (0, 2), (2, 1), (1, 1), (2, 2), (0, 0)]
    assert oracle_order(DepTree([0], ["root"])) == [(0, 1), (1, 1), (0, 0)]


def test_oracle_order_left_children_nearest_first():
    # Head 4 with left children 1, 2, 3: nearest (3) comes first.
    tree = DepTree([4, 4, 4, 0], ["a", "b", "c", "d"])
    events = oracle_order(tree)
    attach_order = [t for h, t in events if h == 4 and t != 4]
    assert attach_order == [3, 2, 1]


def test_oracle_order_right_children_nearest_first():
    tree = DepTree([0, 1, 1, 1], ["a", "b", "c", "d"])
    events = oracle_order(tree)
    attach_order = [t for h, t in events if h == 1 and t != 1]
    assert attach_order == [2, 3, 4]


def test_oracle_order_event_count():
    for heads in ([0], [2, 0], [0, 1, 1, 2, 2]):
        tree = DepTree(heads, ["x"] * len(heads))
        events = oracle_order(tree)
        n = len(heads)
        assert len(events) == 2 * n + 1
        assert sum(1 for h, t in events if h == t) == n + 1
        assert events[-1] == (0, 0)


def test_replay_events_roundtrip():
    for heads in ([0], [2, 0], [0, 1, 1], [2, 0, 2, 3]):
        tree = DepTree(heads, ["_"] * len(heads))
        assert replay_events(oracle_order(tree), len(heads)).heads == tuple(heads) or \
            replay_events(oracle_order(tree), len(heads)).heads == heads


def test_replay_events_requires_full_attachment():
    with pytest.raises(TreeError):
        replay_events([(0, 1), (1, 1)], 2)


def test_candidate_mask_rules():
    attached = np.array([False, False, True, False])
    mask = _candidate_mask(1, attached)
    # Word 1: targets are unattached words (1, 3) including itself; never 0.
    assert list(mask) == [False, True, False, True]
    # Root with unattached words left cannot self-point.
    root_mask = _candidate_mask(0, attached)
    assert list(root_mask) == [False, True, False, True]
    # Root with everything attached may only self-point.
    done = np.array([False, True, True, True])
    assert list(_candidate_mask(0, done)) == [True, False, False, False]


def test_run_transition_teacher_forcing_matches_oracle():
    items = items_for([[0, 1, 1], [2, 0]])
    model, _ = tiny_model(items)
    tokens, gold = items[0]
    result = run_transition(model, tokens, gold=gold, want_trace=True)
    assert result.heads == list(gold.heads)
    assert result.labels == list(gold.labels)
    got_events = [(s.head, s.target) for s in result.trace]
    want_events = oracle_order(gold)
    # The trace records pointer decisions only; forced steps are skipped.
    assert got_events == [e for e in want_events if e in got_events]
    assert result.pointer_calls <= 2 * gold.n


def test_zero_params_uniform_loss_closed_form():
    # All-zero parameters give uniform attention and uniform labels, so the
    # losses equal sums of ln(candidate counts) exactly.
    items = items_for([[0, 1, 1, 2]])
    model, _ = tiny_model(items)
    for _, p in model.parameters():
        p.data[...] = 0.0
    tokens, gold = items[0]
    s, l = example_losses(model, tokens, gold)

    n = gold.n
    attached = np.zeros(n + 1, dtype=bool)
    want_structure = 0.0
    for head, target in oracle_order(gold):
        mask = _candidate_mask(head, attached)
        count = int(mask.sum())
        if count > 1:
            want_structure += np.log(count)
        if head != target:
            attached[target] = True
    label_count = len(model.labels)
    want_label = n * np.log(label_count)
    assert s.item() == pytest.approx(want_structure, abs=1e-12)
    assert l.item() == pytest.approx(want_label, abs=1e-12)


def test_forced_decode_equals_negated_structure_loss():
    items = items_for([[0, 1, 1], [2, 0, 2]])
    model, _ = tiny_model(items)
    for tokens, gold in items:
        s, _ = example_losses(model, tokens, gold)
        assert forced_decode(model, tokens, gold) == -s.item()


def test_training_reduces_loss():
    items = items_for([[0, 1, 1], [2, 0]])
    model, _ = tiny_model(items)
    params = list(model.parameters())
    from ptrparse.optim import Adam
    opt = Adam(params, lr=0.05, betas=(0.9, 0.99))
    tokens, gold = items[0]

    def total():
        s, l = example_losses(model, tokens, gold)
        return ad.add(s, l)

    first = total().item()
    for _ in range(15):
        opt.zero_grad()
        ad.backward(total())
        opt.step()
    assert total().item() < first * 0.7


def test_decode_greedy_valid_and_deterministic():
    items = items_for([[0, 1, 1, 2, 2]])
    model, _ = tiny_model(items)
    tokens, _ = items[0]
    tree = decode_greedy(model, tokens)
    tree.validate()
    assert tree.n == 5
    again = decode_greedy(model, tokens)
    assert tree == again


def test_decode_greedy_single_word():
    items = items_for([[0]])
    model, _ = tiny_model(items)
    tree = decode_greedy(model, sentence(1))
    assert list(tree.heads) == [0]


def test_decode_greedy_trace():
    items = items_for([[0, 1]])
    model, _ = tiny_model(items)
    tree, trace = decode_greedy(model, sentence(2), want_trace=True)
    tree.validate()
    text = format_trace(trace)
    assert "step=" in text and "action=" in text and "logp=" in text


def test_decode_beam_one_matches_greedy_bitwise():
    # Same tree, and the beam's log-probability equals the greedy path's
    # own accumulated structure score exactly.  forced_decode would replay
    # the canonical order, which is a different path through the same tree.
    items = items_for([[0, 1, 1], [2, 0], [0, 1, 1, 2, 2, 4]])
    model, _ = tiny_model(items)
    for n in (1, 2, 3, 5, 6):
        tokens = sentence(n)
        greedy_run = run_transition(model, tokens)
        beamed, log_prob = decode_beam(model, tokens, beam_size=1)
        assert DepTree(greedy_run.heads, greedy_run.labels) == beamed
        assert log_prob == -greedy_run.structure_loss.item()


def test_decode_beam_logp_at_least_greedy():
    items = items_for([[0, 1, 1, 2]])
    model, _ = tiny_model(items)
    for n in (2, 4, 6, 7):
        tokens = sentence(n)
        greedy_tree = decode_greedy(model, tokens)
        greedy_logp = forced_decode(model, tokens, greedy_tree)
        _, beam_logp = decode_beam(model, tokens, beam_size=4)
        assert beam_logp >= greedy_logp - 1e-12


def test_decode_beam_rejects_bad_size():
    items = items_for([[0]])
    model, _ = tiny_model(items)
    with pytest.raises(ConfigError):
        decode_beam(model, sentence(1), beam_size=0)


def test_run_transition_pointer_budget():
    # At most 2n pointer invocations: n+1 self-points plus n attachments,
    # minus at least one forced single-candidate step.
    items = items_for([[0, 1, 1]])
    model, _ = tiny_model(items)
    for n in (1, 2, 5, 9):
        result = run_transition(model, sentence(n))
        assert result.pointer_calls <= 2 * n
        DepTree(result.heads, result.labels).validate()


def test_score_evaluations_counted():
    items = items_for([[0, 1, 1]])
    model, _ = tiny_model(items)
    r5 = run_transition(model, sentence(5))
    r10 = run_transition(model, sentence(10))
    assert r10.score_evaluations > r5.score_evaluations > 0


def test_build_dep_vocabs_sorted_and_special():
    items = items_for([[0, 1]])
    items[0][0][0] = Token("zebra", "X")
    word_vocab, pos_vocab, char_vocab, labels = build_dep_vocabs(items)
    assert word_vocab.tokens[0] == "<unk>"
    assert word_vocab.tokens[1] == "<root>"
    body = list(word_vocab.tokens[2:])
    assert body == sorted(body)
    assert char_vocab.tokens[0] == "<pad>"
    assert list(labels.names) == sorted(labels.names)


def test_config_validation():
    tiny_config().validate()
    for bad in (dict(variant="xx"), dict(fusion="xx"), dict(encoder_hidden=0),
                dict(embed_dropout=1.0), dict(lr=0.0), dict(beta2=1.0),
                dict(decay=0.0), dict(epochs=True)):
        with pytest.raises(ConfigError):
            tiny_config(**bad).validate()


def test_config_dict_roundtrip_and_coercion():
    config = tiny_config(variant="pst", fusion="plain", beam_size=7)
    data = config_to_dict(config)
    assert data["variant"] == "pst" and data["beam_size"] == 7
    # String values coerce back to typed fields.
    text = {k: str(v) for k, v in data.items()}
    again = config_from_dict(DepConfig, text)
    assert config_to_dict(again) == data
    with pytest.raises(ConfigError):
        config_from_dict(DepConfig, {"no_such_key": "1"})
    with pytest.raises(ConfigError):
        config_from_dict(DepConfig, {"epochs": "many"})


def test_train_dep_history_and_early_stop():
    items = items_for([[0, 1], [0, 1, 1]])
    config = tiny_config(epochs=2, target_uas=None)
    model, history = train_dep(items, config)
    assert len(history) == 2
    assert {"epoch", "loss", "uas", "las", "lr"} <= set(history[0])
    # A target of zero stops after the first epoch.
    stopped_model, stopped = train_dep(items, tiny_config(epochs=50, target_uas=0.0,
                                                          target_las=0.0))
    assert len(stopped) == 1


def test_train_dep_rejects_empty_and_invalid():
    with pytest.raises(ConfigError):
        train_dep([], tiny_config())
    bad = [(sentence(2), DepTree([2, 1], ["a", "b"]))]
    with pytest.raises(TreeError):
        train_dep(bad, tiny_config())


def test_train_dep_keeps_lr_without_dev_set():
    items = items_for([[0, 1], [0, 1, 1]])
    _, history = train_dep(items, tiny_config(epochs=3))
    assert all(row["lr"] == history[0]["lr"] for row in history)


def test_train_dep_decays_lr_on_dev_plateau():
    items = items_for([[0, 1], [0, 1, 1]])
    _, history = train_dep(items, tiny_config(epochs=4, decay=0.5), dev_items=items)
    # With a tiny random model dev scores plateau fast; decay must appear.
    assert history[-1]["lr"] < history[0]["lr"]


def test_gold_heads_recovered_after_overfitting_one_sentence():
    items = items_for([[2, 0, 2]])
    model, _ = tiny_model(items, seed=11)
    from ptrparse.optim import Adam
    opt = Adam(list(model.parameters()), lr=0.05, betas=(0.9, 0.99))
    tokens, gold = items[0]
    for _ in range(60):
        opt.zero_grad()
        s, l = example_losses(model, tokens, gold)
        ad.backward(ad.add(s, l))
        opt.step()
    decoded = decode_greedy(model, tokens)
    assert decoded == gold
