"""
Observation encoding, the feedforward policy/value network and masked action selection.

The network is a plain numpy MLP: three tanh hidden layers shared by a
policy head (one logit per lattice edge) and a value head (one scalar).
Backpropagation is written out by hand so the PPO trainer can compute
exact gradients without an autodiff framework.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import numpy.typing as npt

from permsynth.core.exceptions import InvalidArgumentError, NoValidActionError
from permsynth.core.logging import get_logger
from permsynth.domain.entities.circuit import Permutation
from permsynth.domain.entities.lattice import Lattice, TopologyMask
from permsynth.domain.entities.training import InferenceMode

logger = get_logger(__name__)

ENCODING_VERSION = 1
MASK_OFFSET = -1e9
POLICY_HEAD_SCALE = 0.01

FloatArray = npt.NDArray[np.floating]


# ============================================
# Observation encoding
# ============================================


def observation_size(lattice: Lattice) -> int:
    """Width of an observation: N*N one-hot block, N node flags, E edge flags."""
    n = lattice.num_nodes
    return n * n + n + lattice.num_edges


def encode(perm: Permutation, mask: TopologyMask) -> npt.NDArray[np.float32]:
    """
    Encode one state as ``[one-hot perm (row-major) | node mask | edge mask]``.

    Row i of the one-hot block has its 1 at column ``perm[i]``.

    Raises:
        InvalidArgumentError: permutation length does not match the mask's lattice
    """
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (mask.lattice.num_nodes,):
        raise InvalidArgumentError(
            f"permutation of length {perm.size} does not match a "
            f"{mask.lattice.rows}x{mask.lattice.cols} lattice"
        )
    return encode_batch(perm[None, :], mask.node_mask[None, :], mask.edge_mask[None, :])[0]


def encode_batch(
    perms: npt.NDArray[np.int64],
    node_masks: npt.NDArray[np.bool_],
    edge_masks: npt.NDArray[np.bool_],
) -> npt.NDArray[np.float32]:
    """Vectorised ``encode`` over a batch of (perm, node mask, edge mask) rows."""
    batch, n = perms.shape
    one_hot = np.zeros((batch, n, n), dtype=np.float32)
    rows = np.arange(n)
    one_hot[np.arange(batch)[:, None], rows[None, :], perms] = 1.0
    return np.concatenate(
        [
            one_hot.reshape(batch, n * n),
            node_masks.astype(np.float32),
            edge_masks.astype(np.float32),
        ],
        axis=1,
    )


# ============================================
# Network
# ============================================


def analytic_parameter_count(input_size: int, hidden_sizes: tuple[int, ...], num_actions: int) -> int:
    """Parameter count implied by the layer dimensions."""
    total = 0
    fan_in = input_size
    for width in hidden_sizes:
        total += fan_in * width + width
        fan_in = width
    total += fan_in * num_actions + num_actions  # policy head
    total += fan_in + 1  # value head
    return total


def parameter_shapes(lattice: Lattice, hidden_sizes: tuple[int, ...]) -> list[tuple[int, ...]]:
    """Parameter array shapes in storage order: W1, b1, W2, b2, W3, b3, Wp, bp, Wv, bv."""
    shapes: list[tuple[int, ...]] = []
    fan_in = observation_size(lattice)
    for width in hidden_sizes:
        shapes.extend([(fan_in, width), (width,)])
        fan_in = width
    shapes.extend([(fan_in, lattice.num_edges), (lattice.num_edges,), (fan_in, 1), (1,)])
    return shapes


@dataclass
class ForwardCache:
    """Activations kept by ``forward_with_cache`` for ``backward``."""

    activations: list[FloatArray]


class PolicyNet:
    """
    Policy/value MLP for one lattice.

    Parameters are stored in the fixed order
    ``W1, b1, W2, b2, W3, b3, Wp, bp, Wv, bv`` with weights shaped
    ``(fan_in, fan_out)``; that order is also the on-disk order.
    """

    def __init__(
        self,
        rows: int,
        cols: int,
        hidden_sizes: tuple[int, ...],
        params: list[FloatArray],
        seed: int = 0,
    ):
        self.lattice = Lattice(rows=rows, cols=cols)
        self.hidden_sizes = tuple(int(w) for w in hidden_sizes)
        self.seed = seed
        expected = self.layer_shapes()
        if len(params) != len(expected):
            raise InvalidArgumentError(f"expected {len(expected)} parameter arrays, got {len(params)}")
        for arr, shape in zip(params, expected):
            if arr.shape != shape:
                raise InvalidArgumentError(f"parameter shape {arr.shape} does not match {shape}")
        self.params = params

    @classmethod
    def initialize(
        cls,
        lattice: Lattice,
        hidden_sizes: tuple[int, ...] = (512, 512, 512),
        seed: int = 0,
        dtype: type = np.float32,
    ) -> "PolicyNet":
        """
        Fresh network with uniform fan-in initialisation.

        Weights are drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases start
        at zero and the policy head weights are scaled down so the initial
        policy is close to uniform over the active edges.
        """
        rng = np.random.default_rng(seed)
        params: list[FloatArray] = []
        fan_in = observation_size(lattice)
        num_actions = lattice.num_edges
        for width in hidden_sizes:
            bound = 1.0 / np.sqrt(fan_in)
            params.append(rng.uniform(-bound, bound, size=(fan_in, width)).astype(dtype))
            params.append(np.zeros(width, dtype=dtype))
            fan_in = width
        bound = 1.0 / np.sqrt(fan_in)
        head = POLICY_HEAD_SCALE * rng.uniform(-bound, bound, size=(fan_in, num_actions))
        params.append(head.astype(dtype))
        params.append(np.zeros(num_actions, dtype=dtype))
        params.append(rng.uniform(-bound, bound, size=(fan_in, 1)).astype(dtype))
        params.append(np.zeros(1, dtype=dtype))
        net = cls(lattice.rows, lattice.cols, tuple(hidden_sizes), params, seed=seed)
        logger.debug(
            "Policy network initialized",
            rows=lattice.rows,
            cols=lattice.cols,
            hidden_sizes=list(hidden_sizes),
            parameters=net.parameter_count,
            seed=seed,
        )
        return net

    @property
    def input_size(self) -> int:
        return observation_size(self.lattice)

    @property
    def num_actions(self) -> int:
        return self.lattice.num_edges

    @property
    def dtype(self) -> np.dtype:
        return self.params[0].dtype

    @property
    def parameter_count(self) -> int:
        """Number of scalar parameters actually held."""
        return int(sum(p.size for p in self.params))

    def layer_shapes(self) -> list[tuple[int, ...]]:
        """Shapes of the parameter arrays in storage order."""
        return parameter_shapes(self.lattice, self.hidden_sizes)

    def copy(self) -> "PolicyNet":
        """Independent snapshot of the parameters."""
        return PolicyNet(
            self.lattice.rows,
            self.lattice.cols,
            self.hidden_sizes,
            [p.copy() for p in self.params],
            seed=self.seed,
        )

    def astype(self, dtype: type) -> "PolicyNet":
        """Copy with every parameter cast to ``dtype``."""
        return PolicyNet(
            self.lattice.rows,
            self.lattice.cols,
            self.hidden_sizes,
            [p.astype(dtype) for p in self.params],
            seed=self.seed,
        )

    def matches(self, lattice: Lattice) -> bool:
        """Whether the network was built for this lattice."""
        return self.lattice.rows == lattice.rows and self.lattice.cols == lattice.cols

    def _check_input(self, obs: FloatArray) -> FloatArray:
        if obs.shape[-1] != self.input_size:
            raise InvalidArgumentError(
                f"observation width {obs.shape[-1]} does not match network input {self.input_size}"
            )
        return obs.astype(self.dtype, copy=False)

    def forward(self, obs: FloatArray) -> tuple[FloatArray, FloatArray]:
        """
        Evaluate logits and value.

        Accepts one observation (1-D) or a batch (2-D); the outputs follow
        the input rank: ``(E,)`` and scalar array, or ``(B, E)`` and ``(B,)``.
        """
        single = obs.ndim == 1
        x = self._check_input(np.atleast_2d(obs))
        logits, values, _ = self._forward(x, keep=False)
        if single:
            return logits[0], values[0]
        return logits, values

    def forward_with_cache(self, obs: FloatArray) -> tuple[FloatArray, FloatArray, ForwardCache]:
        """Batched forward pass that also returns what ``backward`` needs."""
        x = self._check_input(np.atleast_2d(obs))
        return self._forward(x, keep=True)

    def _forward(self, x: FloatArray, keep: bool) -> tuple[FloatArray, FloatArray, ForwardCache]:
        activations = [x]
        h = x
        depth = len(self.hidden_sizes)
        for layer in range(depth):
            h = np.tanh(h @ self.params[2 * layer] + self.params[2 * layer + 1])
            if keep:
                activations.append(h)
        w_p, b_p, w_v, b_v = self.params[2 * depth :]
        logits = h @ w_p + b_p
        values = (h @ w_v + b_v)[:, 0]
        return logits, values, ForwardCache(activations=activations if keep else [])

    def backward(
        self, cache: ForwardCache, d_logits: FloatArray, d_values: FloatArray
    ) -> list[FloatArray]:
        """
        Gradients of a scalar loss given its gradients w.r.t. the outputs.

        Args:
            cache: From the matching ``forward_with_cache`` call
            d_logits: dLoss/dlogits, shape (B, E)
            d_values: dLoss/dvalue, shape (B,)

        Returns:
            One gradient array per parameter, in storage order
        """
        depth = len(self.hidden_sizes)
        acts = cache.activations
        top = acts[-1]
        w_p, _, w_v, _ = self.params[2 * depth :]
        d_values = d_values[:, None]

        head_grads = [
            top.T @ d_logits,
            d_logits.sum(axis=0),
            top.T @ d_values,
            d_values.sum(axis=0),
        ]
        d_h = d_logits @ w_p.T + d_values @ w_v.T

        trunk_grads: list[FloatArray] = []
        for layer in reversed(range(depth)):
            h = acts[layer + 1]
            d_z = d_h * (1.0 - h * h)
            trunk_grads = [acts[layer].T @ d_z, d_z.sum(axis=0)] + trunk_grads
            if layer > 0:
                d_h = d_z @ self.params[2 * layer].T
        return trunk_grads + head_grads


# ============================================
# Masked action distribution
# ============================================


@dataclass(frozen=True)
class MaskedDistribution:
    """Softmax restricted to the active edges; inactive edges carry exactly 0."""

    probs: npt.NDArray[np.float64]

    @property
    def entropy(self) -> float:
        support = self.probs > 0
        p = self.probs[support]
        return float(-(p * np.log(p)).sum())


def masked_log_softmax(
    logits: FloatArray, edge_masks: npt.NDArray[np.bool_]
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """
    Row-wise masked softmax in float64.

    Inactive logits get the additive ``MASK_OFFSET`` before normalisation and
    their probabilities are zeroed afterwards.

    Returns:
        (log_probs, probs); log_probs of inactive edges are 0

    Raises:
        NoValidActionError: a row has no active edge
    """
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    edge_masks = np.atleast_2d(edge_masks)
    if not edge_masks.any(axis=1).all():
        raise NoValidActionError("no active edge to choose from")
    shifted = np.where(edge_masks, logits, logits + MASK_OFFSET)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    exps = np.where(edge_masks, np.exp(shifted), 0.0)
    total = exps.sum(axis=1, keepdims=True)
    probs = exps / total
    log_probs = np.where(edge_masks, shifted - np.log(total), 0.0)
    return log_probs, probs


def masked_distribution(logits: FloatArray, mask: TopologyMask) -> MaskedDistribution:
    """
    Action distribution over the active edges of ``mask``.

    Raises:
        NoValidActionError: the mask has no active edge
    """
    if mask.num_active_edges == 0:
        raise NoValidActionError("topology has no active edge")
    _, probs = masked_log_softmax(logits, mask.edge_mask)
    return MaskedDistribution(probs=probs[0])


def sample_action(probs: npt.NDArray[np.float64], rng: np.random.Generator) -> int:
    """Inverse-CDF draw; zero-probability entries are never returned."""
    cumulative = np.cumsum(probs)
    u = rng.random() * cumulative[-1]
    index = int(np.searchsorted(cumulative, u, side="right"))
    # u can round up to the total
    return min(index, int(np.flatnonzero(probs)[-1]))


def greedy_action(logits: FloatArray, edge_mask: npt.NDArray[np.bool_]) -> int:
    """Argmax over active edges; ties go to the lowest edge index."""
    if not edge_mask.any():
        raise NoValidActionError("no active edge to choose from")
    return int(np.argmax(np.where(edge_mask, np.asarray(logits, dtype=np.float64), -np.inf)))


def act(
    net: PolicyNet,
    perm: Permutation,
    mask: TopologyMask,
    mode: InferenceMode,
    rng: Optional[np.random.Generator] = None,
) -> int:
    """
    Choose the next swap for one state.

    Raises:
        NoValidActionError: the mask has no active edge
        InvalidArgumentError: net and mask lattices differ, or sampling without rng
    """
    if not net.matches(mask.lattice):
        raise InvalidArgumentError(
            f"network is for a {net.lattice.rows}x{net.lattice.cols} lattice, "
            f"topology is {mask.lattice.rows}x{mask.lattice.cols}"
        )
    logits, _ = net.forward(encode(perm, mask))
    if mode is InferenceMode.GREEDY:
        return greedy_action(logits, mask.edge_mask)
    if rng is None:
        raise InvalidArgumentError("sampling mode needs a random generator")
    return sample_action(masked_distribution(logits, mask).probs, rng)
