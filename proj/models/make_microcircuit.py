#!/usr/bin/env python3
"""Writes microcircuit.json: the 8-population layered cortical microcircuit
model in snnbench's network format.

Pairwise synapse totals follow the model's fixed-total-number rule:
K = log(1 - p) / log(1 - 1/(N_pre * N_post)).
"""
import json
import math
import pathlib

POPULATIONS = ["L23E", "L23I", "L4E", "L4I", "L5E", "L5I", "L6E", "L6I"]
SIZES = [20683, 5834, 21915, 5479, 4850, 1065, 14395, 2948]
# rows: target, columns: source
CONN_PROBS = [
    [0.1009, 0.1689, 0.0437, 0.0818, 0.0323, 0.0, 0.0076, 0.0],
    [0.1346, 0.1371, 0.0316, 0.0515, 0.0755, 0.0, 0.0042, 0.0],
    [0.0077, 0.0059, 0.0497, 0.135, 0.0067, 0.0003, 0.0453, 0.0],
    [0.0691, 0.0029, 0.0794, 0.1597, 0.0033, 0.0, 0.1057, 0.0],
    [0.1004, 0.0622, 0.0505, 0.0057, 0.0831, 0.3726, 0.0204, 0.0],
    [0.0548, 0.0269, 0.0257, 0.0022, 0.06, 0.3158, 0.0086, 0.0],
    [0.0156, 0.0066, 0.0211, 0.0166, 0.0572, 0.0197, 0.0396, 0.2252],
    [0.0364, 0.001, 0.0034, 0.0005, 0.0277, 0.008, 0.0658, 0.1443],
]
K_EXT = [1600, 1500, 2100, 1900, 2000, 1900, 2900, 2100]
BG_RATE = 8.0  # spikes/s per external source

NEURON = {
    "tau_m": 10.0, "C_m": 250.0, "E_L": -65.0, "V_th": -50.0,
    "V_reset": -65.0, "t_ref": 2.0, "tau_syn_ex": 0.5, "tau_syn_in": 0.5,
    "I_e": 0.0,
}
PSP_MEAN = 0.15  # mV
WEIGHT_REL_SD = 0.1
G = 4.0  # inhibitory / excitatory weight ratio (magnitude)
DELAY_E, DELAY_I, DELAY_REL_SD = 1.5, 0.75, 0.5


def psc_from_psp(psp, c_m, tau_m, tau_syn):
    sub = 1.0 / (tau_syn - tau_m)
    pre = tau_m * tau_syn / c_m * sub
    frac = (tau_m / tau_syn) ** sub
    return psp / (pre * (frac ** tau_m - frac ** tau_syn))


def main():
    w = psc_from_psp(PSP_MEAN, NEURON["C_m"], NEURON["tau_m"], NEURON["tau_syn_ex"])
    pops = []
    for name, size, k_ext in zip(POPULATIONS, SIZES, K_EXT):
        pops.append({
            "name": name, "size": size, "params": dict(NEURON),
            "ext_rate": BG_RATE, "ext_indegree": k_ext, "ext_weight": w,
            "v_init": {"mean": -58.0, "sd": 10.0},
        })
    conns = []
    for t, (tname, n_post) in enumerate(zip(POPULATIONS, SIZES)):
        for s, (sname, n_pre) in enumerate(zip(POPULATIONS, SIZES)):
            p = CONN_PROBS[t][s]
            prod = n_pre * n_post
            k = round(math.log(1.0 - p) / math.log((prod - 1.0) / prod))
            excitatory = sname.endswith("E")
            mean = w if excitatory else G * w
            if sname == "L4E" and tname == "L23E":
                mean *= 2.0
            delay = DELAY_E if excitatory else DELAY_I
            conns.append({
                "source": sname, "target": tname, "total_synapses": k,
                "weight_mean": mean, "weight_sd": WEIGHT_REL_SD * mean,
                "delay_mean": delay, "delay_sd": DELAY_REL_SD * delay,
                "sign": "excitatory" if excitatory else "inhibitory",
            })
    doc = {
        "grid": {"h": 0.1, "t_model": 10000.0, "t_transient": 100.0,
                 "min_delay": 0.1, "max_delay": 6.0},
        "populations": pops, "connections": conns, "seed": 55,
    }
    out = pathlib.Path(__file__).with_name("microcircuit.json")
    out.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"{sum(SIZES)} neurons, {sum(c['total_synapses'] for c in conns)} synapses")


if __name__ == "__main__":
    main()
