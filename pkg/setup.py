from setuptools import setup
import sys

if sys.version_info < (3, 9):
    sys.exit('Python < 3.9 is not supported')

version = '0.1.0'

setup(
    name='cdcim',
    packages=['cdcim', 'test', ],
    version=version,
    description='Charge-domain compute-in-memory macro simulator with capacitive adder tree, SAR ADC and fine-tuning',
    license='MIT',
    keywords=['compute-in-memory', 'sar-adc', 'capacitor', 'simulation', ],
    classifiers=[],
    python_requires='>=3.9',
    install_requires=[
        "numpy",
        "sympy",
    ],
    extras_require={
        'test': [
            "pytest",
            "pytest-asyncio",
        ],
    },
    entry_points={
        'console_scripts': [
            'cdcim = cdcim.cli:main',
        ],
    },
)
