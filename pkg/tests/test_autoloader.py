"""Tests for autoloader.py - dynamic discovery of benchmark problems
"""

import logging

import pytest

from hp_nitsche_coupling.autoloader import ProblemRegistry, discover_problems
from hp_nitsche_coupling.models import ParameterError, ProblemDefinition, StudyMode


def make_definition(name="square_smooth"):
    return ProblemDefinition(name=name, description="test", modes=(StudyMode.P,))


def dummy_builder(config, step):
    return None


class TestProblemRegistry:
    """Tests for ProblemRegistry"""

    def test_register(self):
        """Test a definition is stored with its builder"""
        registry = ProblemRegistry()
        registry.register(make_definition(), dummy_builder)
        assert registry.names == ["square_smooth"]
        assert registry.get_builder("square_smooth") is dummy_builder
        assert registry.get_definition("square_smooth").description == "test"

    def test_duplicate(self):
        registry = ProblemRegistry()
        registry.register(make_definition(), dummy_builder)
        with pytest.raises(ValueError, match="already registered"):
            registry.register(make_definition(), dummy_builder)

    def test_rejects_wrong_types(self):
        registry = ProblemRegistry()
        with pytest.raises(TypeError, match="ProblemDefinition"):
            registry.register({"name": "square_smooth"}, dummy_builder)
        with pytest.raises(TypeError, match="callable"):
            registry.register(make_definition(), "not a function")

    def test_missing_builder_warns(self, caplog):
        registry = ProblemRegistry()
        with caplog.at_level(logging.WARNING, logger="hp_nitsche_coupling.autoloader"):
            assert registry.get_builder("lshape_config1") is None
        assert "No builder found" in caplog.text

    def test_unknown_definition(self):
        registry = ProblemRegistry()
        registry.register(make_definition(), dummy_builder)
        with pytest.raises(ParameterError, match="available: square_smooth"):
            registry.get_definition("lshape_config2")


class TestDiscovery:
    """Integration tests against the shipped problems package"""

    def test_discovers_shipped_problems(self):
        """Test all three examples are found and helper modules are skipped"""
        registry = discover_problems()
        assert registry.names == ["lshape_config1", "lshape_config2", "square_smooth"]
        for name in registry.names:
            assert callable(registry.get_builder(name))
            assert registry.get_builder(name).__name__ == f"{name}_builder"

    def test_definitions_carry_modes(self):
        registry = discover_problems()
        assert StudyMode.HP in registry.get_definition("lshape_config2").modes
        assert registry.get_definition("lshape_config2").dof_root == pytest.approx(1.0 / 3.0)

    def test_missing_package(self):
        with pytest.raises(ImportError):
            discover_problems("hp_nitsche_coupling.no_such_package")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
