"""
有限树模型
有限状态、离散时间的滤子概率树; 终端时刻等于树深 N

数值约定: 概率与价格全部为有理数(Fraction)时树为精确树, 所有计算按有理数进行;
否则统一转换为浮点数, 比较使用 1e-12 相对容差
"""

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from na1lab.exceptions import TreeError


logger = logging.getLogger(__name__)


Number = Union[Fraction, float]

REL_TOL = 1e-12


def parse_number(value: Any) -> Number:
    """
    解析数值: 整数与 "p/q" 字符串为有理数, 浮点数保持浮点
    """
    if isinstance(value, bool):
        raise TreeError(f"无法解析数值: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise TreeError(f"无法解析数值: {value!r}") from e
    raise TreeError(f"无法解析数值: {value!r}")


def close(a: Number, b: Number, tol: float = REL_TOL) -> bool:
    """有理数精确比较, 浮点数相对容差比较"""
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    a, b = float(a), float(b)
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def format_number(value: Number) -> Union[str, float]:
    """报告输出: 有理数写成 "p/q" 字符串"""
    if isinstance(value, Fraction):
        return str(value)
    return float(value)


@dataclass
class TreeNode:
    """树节点"""

    id: str
    parent: Optional[str]
    prob: Number
    price: Tuple[Number, ...]
    depth: int = 0
    children: List[str] = field(default_factory=list)


class TreeModel:
    """
    有限概率树
    分支概率严格为正且和为1, 所有叶子位于同一深度
    """

    def __init__(self, nodes: Sequence[TreeNode]):
        if not nodes:
            raise TreeError("树不能为空")
        self._nodes: Dict[str, TreeNode] = {}
        for node in nodes:
            if node.id in self._nodes:
                raise TreeError(f"节点编号重复: {node.id}", node.id)
            self._nodes[node.id] = node

        roots = [n.id for n in nodes if n.parent is None]
        if len(roots) != 1:
            raise TreeError(f"树必须恰好有一个根节点, 实际: {len(roots)}")
        self.root = roots[0]

        dims = {len(n.price) for n in nodes}
        if len(dims) != 1 or 0 in dims:
            raise TreeError("所有节点的价格维数必须一致且 ≥ 1")
        self.dim = dims.pop()

        self.exact = all(
            isinstance(n.prob, Fraction) and all(isinstance(v, Fraction) for v in n.price) for n in nodes
        )
        if not self.exact:
            for node in nodes:
                node.prob = float(node.prob)
                node.price = tuple(float(v) for v in node.price)

        for node in nodes:
            node.children = []
        for node in nodes:
            if node.parent is not None:
                if node.parent not in self._nodes:
                    raise TreeError(f"父节点不存在: {node.parent}", node.id)
                self._nodes[node.parent].children.append(node.id)
        self._assign_depths()
        self._validate_probabilities()

    def _assign_depths(self) -> None:
        seen = set()
        stack = [(self.root, 0)]
        while stack:
            node_id, depth = stack.pop()
            if node_id in seen:
                raise TreeError("树中存在环", node_id)
            seen.add(node_id)
            self._nodes[node_id].depth = depth
            stack.extend((child, depth + 1) for child in self._nodes[node_id].children)
        if len(seen) != len(self._nodes):
            raise TreeError("树不连通")
        depths = {self._nodes[leaf].depth for leaf in self.leaves()}
        if len(depths) != 1:
            raise TreeError(f"所有叶子必须位于同一深度, 实际: {sorted(depths)}")
        self.depth = depths.pop()

    def _validate_probabilities(self) -> None:
        root = self._nodes[self.root]
        if not close(root.prob, Fraction(1) if self.exact else 1.0):
            raise TreeError("根节点概率必须为1", self.root)
        for node in self._nodes.values():
            if node.prob <= 0:
                raise TreeError(f"分支概率必须严格为正: {node.prob}", node.id)
            if node.children:
                total = sum((self._nodes[c].prob for c in node.children), Fraction(0) if self.exact else 0.0)
                if not close(total, Fraction(1) if self.exact else 1.0):
                    raise TreeError(f"子节点概率之和应为1, 实际: {total}", node.id)

    # -----------------------------------------------------------------
    # 查询
    # -----------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def node(self, node_id: str) -> TreeNode:
        if node_id not in self._nodes:
            raise TreeError(f"节点不存在: {node_id}", node_id)
        return self._nodes[node_id]

    def node_ids(self) -> List[str]:
        return list(self._nodes)

    def children(self, node_id: str) -> List[str]:
        return list(self.node(node_id).children)

    def is_terminal(self, node_id: str) -> bool:
        return not self.node(node_id).children

    def leaves(self) -> List[str]:
        return [n.id for n in self._nodes.values() if not n.children]

    def internal(self) -> List[str]:
        """非终端节点(按先序)"""
        return [node_id for node_id in self.preorder() if self._nodes[node_id].children]

    def preorder(self) -> Iterator[str]:
        stack = [self.root]
        while stack:
            node_id = stack.pop()
            yield node_id
            stack.extend(reversed(self._nodes[node_id].children))

    def price(self, node_id: str) -> Tuple[Number, ...]:
        return self.node(node_id).price

    def one(self) -> Number:
        return Fraction(1) if self.exact else 1.0

    def zero(self) -> Number:
        return Fraction(0) if self.exact else 0.0

    def path(self, node_id: str) -> List[str]:
        """根到节点的路径"""
        out = []
        current: Optional[str] = node_id
        while current is not None:
            out.append(current)
            current = self.node(current).parent
        return out[::-1]

    def reach_probabilities(self) -> Dict[str, Number]:
        """P[到达节点]"""
        reach = {self.root: self.one()}
        for node_id in self.preorder():
            for child in self._nodes[node_id].children:
                reach[child] = reach[node_id] * self._nodes[child].prob
        return reach

    # -----------------------------------------------------------------
    # 序列化
    # -----------------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dim": self.dim,
            "nodes": [
                {
                    "id": n.id,
                    "parent": n.parent,
                    "prob": format_number(n.prob),
                    "price": [format_number(v) for v in n.price],
                }
                for n in (self._nodes[i] for i in self.preorder())
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TreeModel":
        """
        从字典构造
        {"nodes": [{"id": "r", "parent": null, "prob": "1", "price": ["1"]}, ...]}
        根节点的 prob 可省略
        """
        if "nodes" not in data:
            raise TreeError("树描述缺少 nodes")
        unknown = set(data) - {"nodes", "dim", "name"}
        if unknown:
            raise TreeError(f"树描述包含未知字段: {', '.join(sorted(unknown))}")
        nodes = []
        for raw in data["nodes"]:
            try:
                node_id = str(raw["id"])
                parent = raw.get("parent")
                price = raw["price"]
            except (KeyError, TypeError) as e:
                raise TreeError(f"节点描述不完整: {raw!r}") from e
            if not isinstance(price, (list, tuple)):
                price = [price]
            prob = raw.get("prob", 1 if parent is None else None)
            if prob is None:
                raise TreeError("非根节点必须给出分支概率", node_id)
            nodes.append(
                TreeNode(
                    id=node_id,
                    parent=None if parent is None else str(parent),
                    prob=parse_number(prob),
                    price=tuple(parse_number(v) for v in price),
                )
            )
        tree = cls(nodes)
        if "dim" in data and int(data["dim"]) != tree.dim:
            raise TreeError(f"声明维数 {data['dim']} 与价格维数 {tree.dim} 不一致")
        return tree

    @classmethod
    def from_file(cls, file_path: Union[str, Path]) -> "TreeModel":
        """从JSON文件加载"""
        path = Path(file_path)
        if not path.exists():
            raise TreeError(f"树描述文件不存在: {file_path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise TreeError(f"树描述文件格式错误: {e}") from e
        tree = cls.from_dict(data)
        logger.debug(f"加载树: {path.name}, 节点数={len(tree)}, 深度={tree.depth}")
        return tree


class TreeMeasure:
    """
    树上的测度: 叶子上的非负质量
    密度 Y(v) = Q(v) / P(v), Q(v) 为 v 以下叶子质量之和
    """

    def __init__(self, tree: TreeModel, masses: Mapping[str, Number]):
        leaves = set(tree.leaves())
        if set(masses) != leaves:
            raise TreeError("测度必须恰好给出每个叶子的质量")
        values = {leaf: masses[leaf] if tree.exact else float(masses[leaf]) for leaf in leaves}
        if any(v < 0 for v in values.values()):
            raise TreeError("测度质量不能为负")
        self.tree = tree
        self.masses = values
        self._node_mass = self._accumulate()

    def _accumulate(self) -> Dict[str, Number]:
        mass: Dict[str, Number] = {}
        for node_id in reversed(list(self.tree.preorder())):
            node = self.tree.node(node_id)
            if node.children:
                mass[node_id] = sum((mass[c] for c in node.children), self.tree.zero())
            else:
                mass[node_id] = self.masses[node_id]
        return mass

    @classmethod
    def from_density(cls, tree: TreeModel, density: Mapping[str, Number]) -> "TreeMeasure":
        """由叶子密度 Y_T 构造: Q(leaf) = Y_T(leaf) P(leaf)"""
        reach = tree.reach_probabilities()
        return cls(tree, {leaf: density[leaf] * reach[leaf] for leaf in tree.leaves()})

    @classmethod
    def from_transitions(cls, tree: TreeModel, weights: Mapping[str, Number]) -> "TreeMeasure":
        """由逐节点转移概率 q(node→child) 构造"""
        reach = {tree.root: tree.one()}
        for node_id in tree.preorder():
            for child in tree.children(node_id):
                reach[child] = reach[node_id] * weights[child]
        return cls(tree, {leaf: reach[leaf] for leaf in tree.leaves()})

    @classmethod
    def reference(cls, tree: TreeModel) -> "TreeMeasure":
        """P 本身"""
        reach = tree.reach_probabilities()
        return cls(tree, {leaf: reach[leaf] for leaf in tree.leaves()})

    @property
    def total(self) -> Number:
        return self._node_mass[self.tree.root]

    def mass(self, node_id: str) -> Number:
        return self._node_mass[node_id]

    def density(self) -> Dict[str, Number]:
        """Y(v) = Q(v) / P(v)"""
        reach = self.tree.reach_probabilities()
        return {node_id: self._node_mass[node_id] / reach[node_id] for node_id in self.tree.node_ids()}

    @property
    def equivalent(self) -> bool:
        """与 P 等价: 所有叶子质量为正"""
        return all(v > 0 for v in self.masses.values())

    def transition(self, node_id: str, child: str) -> Number:
        """条件转移概率 q(node→child)"""
        parent_mass = self._node_mass[node_id]
        if parent_mass == 0:
            raise TreeError("零质量节点没有条件转移概率", node_id)
        return self._node_mass[child] / parent_mass
