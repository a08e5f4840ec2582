"""Shared fixtures: certified environments and the CLI golden suite."""

from valleywalk.bounds import staircase_environment
from valleywalk.env_model import DEFAULT_LAW, sample_environment
from valleywalk.errors import WindowExhaustedError
from valleywalk.potential import compute_potential, gamma_membership, valley_stats

LEM3_FIXTURE = dict(L=4, delta=0.45, stair=2, landing=1, bottom=1, extra=2)


def lem3_env():
    p = dict(LEM3_FIXTURE)
    return staircase_environment(p.pop("L"), p.pop("delta"), **p)


def certified_fixtures():
    out = [(staircase_environment(L, 0.1), L, 0.1) for L in (9, 12, 15, 20, 25, 30)]
    out.append((lem3_env(), LEM3_FIXTURE["L"], LEM3_FIXTURE["delta"]))
    for seed in range(50):
        env = sample_environment(DEFAULT_LAW, -400, 400, seed)
        pot = compute_potential(env)
        for L in (3, 5, 8):
            try:
                s = valley_stats(pot, L)
            except WindowExhaustedError:
                continue
            if gamma_membership(s, 0.5).in_gamma:
                out.append((env, L, 0.5))
    return out


# fixed seed -> fixed payload digest, frozen from the run that established them
GOLDEN = {
    "law_validate": (["law", "validate"],
                     "97ebc5b58b6784c8eaf946785f9238f91fe5e0c094c4161dbb221e922e7424e8"),
    "env_sample": (["env", "sample", "--lo", "-20", "--hi", "20", "--seed", "3"],
                   "06e0f8c97db4506975833633610bc8dd24c0b936e73f77576ced32addaaafaaf"),
    "valley_scan": (["valley", "scan", "--seeds", "5", "--L", "4,8"],
                    "45b4119f67597c4f1513c5d64cd0ddd1acbc0890e06a5ab47ab25ca924ae321d"),
    "return_series": (["kernel", "return-series", "--N", "50", "--seed", "2"],
                      "77615ac3fa94e1fd751b5d0c641a1e6065ff9f3f064471e7b4bef48d28397161"),
    "return_series_const": (["kernel", "return-series", "--N", "30", "--omega-const", "0.5"],
                            "a7452f697fecbe347251fbd5aa95bbd0590b54b1f24176002b38ce755861ae68"),
    "kernel_hit": (["kernel", "hit", "--seed", "5", "--x", "-7", "--y", "0", "--z", "9"],
                   "cc7aee36d8f62e52e37461c160960947bc18dc10a170be8e0378b937425cd06b"),
    "prel2": (["bounds", "check", "--suite", "prel2", "--instances", "10"],
              "18582a975ef3080d51e2856435e21a1cad01ffcdd70fc9c37095ea8a5528fb4d"),
    "prel3": (["bounds", "check", "--suite", "prel3", "--instances", "10"],
              "d48021bf4706c0502d758f480240421e97f2abf7a239a037cddcd6ca85b79039"),
    "prel4": (["bounds", "check", "--suite", "prel4", "--instances", "10"],
              "e5cbb93ad869a857f1270456583130e2ca05cacf173db3c0e2a812fd32deb88a"),
    "lem3": (["bounds", "check", "--suite", "lem3", "--ell-max", "100"],
             "85a2713d338bd846708030705de9b46480605be72434f0fd18261c9b5c4764fe"),
    "prop1": (["bounds", "check", "--suite", "prop1", "--L", "12", "--n", "40,100"],
              "c6d9024a3148e0704d94226ae6928c1397ba8987c1e0c2fe1f47939a5c36e28b"),
    "diverge_weighted": (["diverge", "--mode", "weighted", "--alpha", "0.5", "--N", "200", "--stride", "10"],
                         "72fb3f8d0444954f90cf5d62615b4edda6738617a674f5f9a7381c62bdaf351e"),
    "diverge_product": (["diverge", "--mode", "product", "--d", "2", "--N", "100", "--stride", "10"],
                        "3396c54ef37eaf994e13b7fb6a8990b4bf25df021b8eb296625fbf5a0335e8b4"),
    "density_ahat": (["density", "ahat", "--grid", "0.5:5:0.5"],
                     "e840bd7615bf6c3e8b81cabbaea98dc1c301e075623c2dec9d092974f7b76a8c"),
    "density_histogram": (["density", "histogram", "--seeds", "3", "--N", "200", "--bins", "5"],
                          "9d2aa711717acaf2ded353aaa08c523af0ec532e78ba1ff10248e6120d645368"),
    "simulate": (["simulate", "--horizon", "20", "--replicas", "2000", "--seed", "1"],
                 "d9ffe62e110d3bfc64b2d9835d27b409f979892c4b636945cc0ae347eba59302"),
    "simulate_exact": (["simulate", "--mode", "iid_envs", "--horizon", "10", "--replicas", "1000",
                        "--compare-exact"],
                       "5fb6ed1babbb44fcc9a9d314a81c22723e0ab3aca63b660e3b24eeb646f4be76"),
    "simulate_jumps": (["simulate", "--mode", "lazy_mixture", "--delta-mix", "0.5", "--horizon", "2000",
                        "--replicas", "20", "--jumps", "100", "--parity-n", "100"],
                       "4b2fa177049e884bcc378e43b95145750e087bd229245f51bd80d40438f792f2"),
}
