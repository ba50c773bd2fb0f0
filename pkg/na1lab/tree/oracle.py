"""
有限树精确判定
- 逐节点求严格为正的单步风险中性权重(线性规划 + sympy 有理数精确求解)
- 对偶线性规划搜索单步套利, 作为独立判定
- 穷举停时(截集)检验局部鞅性质
- 分离测度、密度拼接一致性与局部化质量表
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp
from scipy.optimize import linprog

from na1lab.exceptions import PreconditionError, TreeError, ValidationError
from na1lab.grid.streams import stream_generator
from na1lab.tree.model import Number, TreeMeasure, TreeModel, close


logger = logging.getLogger(__name__)


# 严格正权重的最小间隔
FEASIBILITY_TOL = 1e-9

# 单步套利的最小收益
ARBITRAGE_TOL = 1e-9

# 停时枚举上限
MAX_CUTS = 200_000

# 分离检验中策略的箱形约束
DEFAULT_BOUND = 1e3

# 有理化LP解时尝试的分母上限
_DENOMINATORS = (10**6, 10**9, 10**12)

Value = Union[Number, Tuple[Number, ...]]
Process = Mapping[str, Value]


def _vector(value: Value) -> Tuple[Number, ...]:
    return tuple(value) if isinstance(value, (tuple, list)) else (value,)


def _to_fraction(value: Any) -> Fraction:
    rational = sp.nsimplify(value) if not isinstance(value, sp.Rational) else value
    return Fraction(int(rational.p), int(rational.q))


# ---------------------------------------------------------------------------
# 策略与停时
# ---------------------------------------------------------------------------


@dataclass
class TreeStrategy:
    """
    树上的交易策略: 非终端节点上的持仓 ϑ(node)
    未给出的节点持仓为0
    """

    holdings: Dict[str, Tuple[Number, ...]] = field(default_factory=dict)

    def at(self, tree: TreeModel, node_id: str) -> Tuple[Number, ...]:
        return self.holdings.get(node_id, tuple(tree.zero() for _ in range(tree.dim)))

    def wealth(self, tree: TreeModel, capital: Number) -> Dict[str, Number]:
        """X(v) = x + Σ ⟨ϑ(w), S(next) - S(w)⟩, w 为 v 的祖先"""
        values = {tree.root: capital}
        for node_id in tree.preorder():
            theta = self.at(tree, node_id)
            base = tree.price(node_id)
            for child in tree.children(node_id):
                step = sum((t * (s - b) for t, s, b in zip(theta, tree.price(child), base)), tree.zero())
                values[child] = values[node_id] + step
        return values


@dataclass(frozen=True)
class TreeStopping:
    """停时: 与每条根-叶路径恰好相交一次的节点集合(截集)"""

    nodes: FrozenSet[str]

    def validate(self, tree: TreeModel) -> None:
        for leaf in tree.leaves():
            hits = sum(1 for node_id in tree.path(leaf) if node_id in self.nodes)
            if hits != 1:
                raise TreeError(f"停时与路径 {leaf} 相交 {hits} 次", leaf)


def count_stopping_times(tree: TreeModel) -> int:
    """截集数量: c(v) = 1 + Π c(child)"""
    counts: Dict[str, int] = {}
    for node_id in reversed(list(tree.preorder())):
        children = tree.children(node_id)
        counts[node_id] = 1 if not children else 1 + math.prod(counts[c] for c in children)
    return counts[tree.root]


def enumerate_stopping_times(tree: TreeModel, cap: int = MAX_CUTS) -> List[TreeStopping]:
    """枚举全部停时, 数量超过 cap 时抛出 TreeError"""
    total = count_stopping_times(tree)
    if total > cap:
        raise TreeError(f"停时数量 {total} 超过上限 {cap}")

    cuts: Dict[str, List[FrozenSet[str]]] = {}
    for node_id in reversed(list(tree.preorder())):
        options = [frozenset([node_id])]
        children = tree.children(node_id)
        if children:
            for combo in itertools.product(*(cuts[c] for c in children)):
                options.append(frozenset().union(*combo))
        cuts[node_id] = options
    return [TreeStopping(cut) for cut in cuts[tree.root]]


# ---------------------------------------------------------------------------
# 鞅检验
# ---------------------------------------------------------------------------


def _weights(tree: TreeModel, measure: Optional[TreeMeasure], node_id: str) -> List[Tuple[str, Number]]:
    if measure is None:
        return [(child, tree.node(child).prob) for child in tree.children(node_id)]
    return [(child, measure.transition(node_id, child)) for child in tree.children(node_id)]


def exact_martingale_check(tree: TreeModel, process: Process, measure: Optional[TreeMeasure] = None) -> bool:
    """
    Σ_children w·Z_child = Z_node 在每个非终端节点上成立
    :param measure: 缺省使用 P 的分支概率, 否则使用 Q 的条件转移概率
    """
    missing = [node_id for node_id in tree.node_ids() if node_id not in process]
    if missing:
        raise ValidationError(f"过程缺少节点: {missing[:5]}", "process")
    for node_id in tree.internal():
        target = _vector(process[node_id])
        expected = [tree.zero() for _ in target]
        for child, weight in _weights(tree, measure, node_id):
            value = _vector(process[child])
            expected = [e + weight * v for e, v in zip(expected, value)]
        if not all(close(e, t) for e, t in zip(expected, target)):
            return False
    return True


def _probability_masses(tree: TreeModel, measure: Optional[TreeMeasure]) -> Dict[str, Number]:
    if measure is None:
        return tree.reach_probabilities()
    total = measure.total
    return {node_id: measure.mass(node_id) / total for node_id in tree.node_ids()}


def stopped_expectation(
    tree: TreeModel,
    process: Process,
    stopping: TreeStopping,
    measure: Optional[TreeMeasure] = None,
) -> Tuple[Number, ...]:
    """E[Z_τ] = Σ_{v∈τ} P(v) Z(v)"""
    masses = _probability_masses(tree, measure)
    dim = len(_vector(process[tree.root]))
    out = [tree.zero() for _ in range(dim)]
    for node_id in stopping.nodes:
        out = [o + masses[node_id] * v for o, v in zip(out, _vector(process[node_id]))]
    return tuple(out)


def martingale_by_enumeration(
    tree: TreeModel,
    process: Process,
    measure: Optional[TreeMeasure] = None,
    cuts: Optional[Sequence[TreeStopping]] = None,
) -> bool:
    """对所有停时 τ 检查 E[Z_τ] = Z_0"""
    cuts = cuts if cuts is not None else enumerate_stopping_times(tree)
    start = _vector(process[tree.root])
    for cut in cuts:
        value = stopped_expectation(tree, process, cut, measure)
        if not all(close(v, s) for v, s in zip(value, start)):
            return False
    return True


@dataclass(frozen=True)
class DeflatedMartingaleResult:
    """X 是 Q-鞅 ⟺ Y^Q X 是 P-鞅"""

    q_martingale: bool
    deflated_p_martingale: bool

    @property
    def holds(self) -> bool:
        return self.q_martingale == self.deflated_p_martingale


def _require_probability(measure: TreeMeasure) -> None:
    if not measure.equivalent:
        raise PreconditionError("测度与 P 不等价", "equivalent_measure")
    if not close(measure.total, measure.tree.one()):
        raise TreeError(f"测度总质量必须为1: {measure.total}")


def deflated_martingale_check(
    tree: TreeModel,
    measure: TreeMeasure,
    process: Mapping[str, Number],
    cuts: Optional[Sequence[TreeStopping]] = None,
) -> DeflatedMartingaleResult:
    """
    穷举全部停时, 分别检验 X 的 Q-鞅性与 Y^Q X 的 P-鞅性
    """
    _require_probability(measure)
    cuts = cuts if cuts is not None else enumerate_stopping_times(tree)
    density = measure.density()
    deflated = {node_id: density[node_id] * process[node_id] for node_id in tree.node_ids()}
    return DeflatedMartingaleResult(
        q_martingale=martingale_by_enumeration(tree, process, measure, cuts),
        deflated_p_martingale=martingale_by_enumeration(tree, deflated, None, cuts),
    )


@dataclass(frozen=True)
class WealthMartingaleResult:
    """S 是 Q-鞅 ⟺ 所有可行财富过程都是 Q-鞅"""

    price_martingale: bool
    wealth_martingale: bool
    strategies: int

    @property
    def holds(self) -> bool:
        return self.price_martingale == self.wealth_martingale


def _admissible_capital(tree: TreeModel, strategy: TreeStrategy) -> Number:
    """使财富在所有节点上非负的初始资本"""
    trial = strategy.wealth(tree, tree.zero())
    lowest = min(trial.values())
    return tree.one() - lowest if lowest < 0 else tree.one()


def elementary_strategies(tree: TreeModel) -> List[TreeStrategy]:
    """在单个节点上持有单位资产 e_i 的策略"""
    out = []
    for node_id in tree.internal():
        for axis in range(tree.dim):
            unit = tuple(tree.one() if i == axis else tree.zero() for i in range(tree.dim))
            out.append(TreeStrategy({node_id: unit}))
    return out


def random_strategies(tree: TreeModel, count: int, seed: int) -> List[TreeStrategy]:
    """随机整数持仓策略"""
    out = []
    for index in range(count):
        rng = stream_generator(seed, index)
        holdings = {}
        for node_id in tree.internal():
            draw = rng.integers(-3, 4, tree.dim)
            holdings[node_id] = tuple(Fraction(int(v)) if tree.exact else float(v) for v in draw)
        out.append(TreeStrategy(holdings))
    return out


def wealth_martingale_check(
    tree: TreeModel, measure: TreeMeasure, trials: int = 10, seed: int = 0
) -> WealthMartingaleResult:
    """
    比较 S 的 Q-鞅性与单位资产策略、随机策略对应财富过程的 Q-鞅性
    """
    _require_probability(measure)
    prices = {node_id: tree.price(node_id) for node_id in tree.node_ids()}
    price_martingale = exact_martingale_check(tree, prices, measure)
    strategies = elementary_strategies(tree) + random_strategies(tree, trials, seed)
    wealth_martingale = True
    for strategy in strategies:
        process = strategy.wealth(tree, _admissible_capital(tree, strategy))
        if not exact_martingale_check(tree, process, measure):
            wealth_martingale = False
            break
    return WealthMartingaleResult(price_martingale, wealth_martingale, len(strategies))


# ---------------------------------------------------------------------------
# 紧缩因子可行性
# ---------------------------------------------------------------------------


def _one_step_system(tree: TreeModel, node_id: str) -> Tuple[List[str], np.ndarray, np.ndarray]:
    children = tree.children(node_id)
    rows = [[1.0] * len(children)]
    rhs = [1.0]
    for axis in range(tree.dim):
        rows.append([float(tree.price(child)[axis]) for child in children])
        rhs.append(float(tree.price(node_id)[axis]))
    return children, np.array(rows), np.array(rhs)


def _exact_weights(tree: TreeModel, node_id: str, guess: np.ndarray) -> Optional[List[Fraction]]:
    """在有理数上求解单步方程组, 自由变量取 LP 解的有理近似"""
    children = tree.children(node_id)
    rows = [[sp.Integer(1)] * len(children)]
    rhs = [sp.Integer(1)]
    for axis in range(tree.dim):
        rows.append([sp.Rational(tree.price(c)[axis].numerator, tree.price(c)[axis].denominator) for c in children])
        value = tree.price(node_id)[axis]
        rhs.append(sp.Rational(value.numerator, value.denominator))
    try:
        solution, params = sp.Matrix(rows).gauss_jordan_solve(sp.Matrix(rhs))
    except ValueError:
        return None

    free = {}
    for index, entry in enumerate(solution):
        if entry in set(params):
            free[index] = entry
    for limit in _DENOMINATORS:
        subs = {
            symbol: sp.Rational(*_fraction_pair(Fraction(float(guess[index])).limit_denominator(limit)))
            for index, symbol in free.items()
        }
        values = [_to_fraction(entry.subs(subs)) for entry in solution]
        if all(v > 0 for v in values):
            return values
    return None


def _fraction_pair(value: Fraction) -> Tuple[int, int]:
    return value.numerator, value.denominator


def one_step_weights(tree: TreeModel, node_id: str) -> Optional[Dict[str, Number]]:
    """
    单步严格正风险中性权重: Σq = 1, Σ q S_child = S_node, q > 0
    线性规划最大化 min q; 精确树上再用 sympy 求出有理数解
    :return: 子节点 -> q, 不存在时返回 None
    """
    children, a_eq, b_eq = _one_step_system(tree, node_id)
    k = len(children)
    # 变量 (q_1..q_k, ε), 最大化 ε
    cost = np.zeros(k + 1)
    cost[-1] = -1.0
    a_ub = np.hstack([-np.eye(k), np.ones((k, 1))])
    result = linprog(
        cost,
        A_ub=a_ub,
        b_ub=np.zeros(k),
        A_eq=np.hstack([a_eq, np.zeros((a_eq.shape[0], 1))]),
        b_eq=b_eq,
        bounds=[(0.0, 1.0)] * (k + 1),
        method="highs",
    )
    if result.status != 0 or -result.fun <= FEASIBILITY_TOL:
        return None
    guess = result.x[:k]
    if tree.exact:
        exact = _exact_weights(tree, node_id, guess)
        if exact is not None:
            return dict(zip(children, exact))
        logger.warning(f"节点 {node_id} 的有理数求解失败, 使用浮点权重")
    return {child: float(q) for child, q in zip(children, guess)}


def find_one_step_arbitrage(tree: TreeModel, node_id: str) -> Optional[Tuple[float, ...]]:
    """
    单步套利搜索(对偶问题): ⟨ϑ, ΔS_j⟩ ≥ 0 对所有子节点成立且至少一个严格为正
    最大化 Σ_j ⟨ϑ, ΔS_j⟩, ϑ ∈ [-1, 1]^d
    """
    children = tree.children(node_id)
    base = np.array([float(v) for v in tree.price(node_id)])
    moves = np.array([[float(v) for v in tree.price(child)] for child in children]) - base
    result = linprog(
        -moves.sum(axis=0),
        A_ub=-moves,
        b_ub=np.zeros(len(children)),
        bounds=[(-1.0, 1.0)] * tree.dim,
        method="highs",
    )
    if result.status != 0 or -result.fun <= ARBITRAGE_TOL:
        return None
    return tuple(float(v) for v in result.x)


@dataclass
class FeasibilityResult:
    """紧缩因子可行性"""

    feasible: bool
    weights: Dict[str, Number] = field(default_factory=dict)
    density: Dict[str, Number] = field(default_factory=dict)
    certificate_node: Optional[str] = None
    certificate: Optional[Tuple[float, ...]] = None

    def measure(self, tree: TreeModel) -> TreeMeasure:
        """由单步权重构造的等价鞅测度"""
        if not self.feasible:
            raise PreconditionError("不存在紧缩因子", "deflator_feasible")
        return TreeMeasure.from_transitions(tree, {tree.root: tree.one(), **self.weights})


def deflator_feasibility(tree: TreeModel) -> FeasibilityResult:
    """
    逐节点求解 E[Y_child/Y_node · (1, S_child)] = (1, S_node)
    Y_child = Y_node · q / p; 不可行时返回单步套利方向作为证书
    """
    weights: Dict[str, Number] = {}
    for node_id in tree.internal():
        step = one_step_weights(tree, node_id)
        if step is None:
            certificate = find_one_step_arbitrage(tree, node_id)
            logger.info(f"节点 {node_id} 不存在严格正权重, 套利方向: {certificate}")
            return FeasibilityResult(False, certificate_node=node_id, certificate=certificate)
        weights.update(step)

    density: Dict[str, Number] = {tree.root: tree.one()}
    for node_id in tree.preorder():
        for child in tree.children(node_id):
            density[child] = density[node_id] * weights[child] / tree.node(child).prob
    return FeasibilityResult(True, weights=weights, density=density)


def no_arbitrage_by_search(tree: TreeModel) -> bool:
    """对每个非终端节点做单步套利搜索, 全部失败时返回 True"""
    return all(find_one_step_arbitrage(tree, node_id) is None for node_id in tree.internal())


# ---------------------------------------------------------------------------
# 分离测度
# ---------------------------------------------------------------------------


@dataclass
class SeparatingResult:
    """E_Q[X_T] ≤ X_0 对所有非负财富过程成立"""

    separating: bool
    max_gain: float
    bound: float
    strategy: Optional[TreeStrategy] = None


def separating_check(tree: TreeModel, measure: TreeMeasure, bound: float = DEFAULT_BOUND) -> SeparatingResult:
    """
    线性规划: 在 X_0 = 1、X ≥ 0、|ϑ| ≤ bound 的策略多面体上最大化 E_Q[X_T] - X_0
    最大收益为正时返回对应策略作为分离失败的证书
    """
    if bound < 0:
        raise ValidationError(f"策略界不能为负: {bound}", "bound", bound)
    if not all(v > 0 for v in measure.density().values()):
        raise PreconditionError("测度密度必须严格为正", "positive_density")
    if bound == 0:
        return SeparatingResult(True, 0.0, 0.0)

    internal = tree.internal()
    index = {node_id: i for i, node_id in enumerate(internal)}
    d = tree.dim
    n_vars = len(internal) * d

    # 每个节点财富 X(v) - 1 关于 ϑ 的系数
    coeffs: Dict[str, np.ndarray] = {tree.root: np.zeros(n_vars)}
    for node_id in tree.preorder():
        base = np.array([float(v) for v in tree.price(node_id)])
        for child in tree.children(node_id):
            row = coeffs[node_id].copy()
            offset = index[node_id] * d
            row[offset: offset + d] += np.array([float(v) for v in tree.price(child)]) - base
            coeffs[child] = row

    total = float(measure.total)
    objective = np.zeros(n_vars)
    for leaf in tree.leaves():
        objective += float(measure.mass(leaf)) / total * coeffs[leaf]
    others = [node_id for node_id in tree.node_ids() if node_id != tree.root]
    result = linprog(
        -objective,
        A_ub=-np.array([coeffs[node_id] for node_id in others]),
        b_ub=np.ones(len(others)),
        bounds=[(-bound, bound)] * n_vars,
        method="highs",
    )
    if result.status != 0:
        raise TreeError(f"分离检验线性规划失败: {result.message}")
    gain = float(-result.fun)
    scale = 1.0 + bound * max(1.0, max(abs(float(v)) for n in tree.node_ids() for v in tree.price(n)))
    separating = gain <= FEASIBILITY_TOL * scale
    strategy = None
    if not separating:
        strategy = TreeStrategy(
            {node_id: tuple(float(v) for v in result.x[index[node_id] * d: index[node_id] * d + d]) for node_id in internal}
        )
    return SeparatingResult(separating, gain, float(bound), strategy)


# ---------------------------------------------------------------------------
# 密度拼接与局部化质量表
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PatchingResult:
    """逐层拼接的密度与终端质量密度是否一致"""

    consistent: bool
    max_discrepancy: float


def patching_consistency(tree: TreeModel, measure: TreeMeasure) -> PatchingResult:
    """
    逐层: Y(child) = Y(node) · q(node→child) / p(child)
    终端: Y(v) = Q(v) / P(v)
    """
    if not measure.equivalent:
        raise PreconditionError("测度与 P 不等价", "equivalent_measure")
    direct = measure.density()
    patched = {tree.root: direct[tree.root]}
    for node_id in tree.preorder():
        for child in tree.children(node_id):
            patched[child] = patched[node_id] * measure.transition(node_id, child) / tree.node(child).prob
    consistent = all(close(patched[n], direct[n]) for n in tree.node_ids())
    discrepancy = max(abs(float(patched[n]) - float(direct[n])) for n in tree.node_ids())
    return PatchingResult(consistent, discrepancy)


@dataclass
class FingerprintTable:
    """各树深、各水平下的 Qⁿ[Ω] 与 Qⁿ[τ_n ≥ T]"""

    rows: List[Dict[str, float]] = field(default_factory=list)

    def survival(self, depth: int, level: float) -> float:
        for row in self.rows:
            if row["depth"] == depth and row["level"] == level:
                return row["survival_mass"]
        raise KeyError((depth, level))


def additivity_fingerprint(
    cases: Sequence[Tuple[TreeModel, Mapping[str, Number]]],
    levels: Sequence[float],
) -> FingerprintTable:
    """
    对每棵树与其上的正过程 Y (Y_0 = 1), 按首达水平 τ_n = min{k: Y_k ≥ n} 计算
    Qⁿ[Ω] = E[Y_{τ_n∧N}] 与 Qⁿ[τ_n ≥ N] = E[Y_N 1{τ_n ≥ N}]
    """
    table = FingerprintTable()
    for tree, process in cases:
        reach = tree.reach_probabilities()
        terminal_mass = sum(float(reach[leaf]) * float(process[leaf]) for leaf in tree.leaves())
        for level in levels:
            total = survival = 0.0
            for leaf in tree.leaves():
                path = tree.path(leaf)
                hit = next((k for k, node_id in enumerate(path) if float(process[node_id]) >= level), None)
                weight = float(reach[leaf])
                if hit is None:
                    total += weight * float(process[leaf])
                    survival += weight * float(process[leaf])
                else:
                    total += weight * float(process[path[hit]])
                    if hit >= tree.depth:
                        survival += weight * float(process[leaf])
            table.rows.append(
                {
                    "depth": tree.depth,
                    "level": float(level),
                    "total_mass": total,
                    "survival_mass": survival,
                    "terminal_mass": terminal_mass,
                }
            )
    return table
